#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace paac {

struct Triple {
  int user;
  int pos;
  int neg;
};

// One training batch: BPR triples plus the deduplicated batch item/user sets
// and each user's positives within the batch.
struct MiniBatch {
  std::vector<Triple> triples;
  std::vector<int> batch_items;  // sorted unique positives (I_B)
  std::vector<int> batch_users;  // sorted unique users
  // per_user_items[k] lists the (sorted unique) batch positives of batch_users[k].
  std::vector<std::vector<int>> per_user_items;

  void derive_index_sets() {
    batch_items.clear();
    batch_users.clear();
    per_user_items.clear();
    for (const auto& t : triples) {
      batch_items.push_back(t.pos);
      batch_users.push_back(t.user);
    }
    std::sort(batch_items.begin(), batch_items.end());
    batch_items.erase(std::unique(batch_items.begin(), batch_items.end()), batch_items.end());
    std::sort(batch_users.begin(), batch_users.end());
    batch_users.erase(std::unique(batch_users.begin(), batch_users.end()), batch_users.end());
    per_user_items.assign(batch_users.size(), {});
    for (const auto& t : triples) {
      const auto k = static_cast<std::size_t>(
          std::lower_bound(batch_users.begin(), batch_users.end(), t.user) - batch_users.begin());
      per_user_items[k].push_back(t.pos);
    }
    for (auto& v : per_user_items) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }
};

// Shuffles the train pairs once, then hands out consecutive batches (the last
// may be short). Each positive gets one uniform negative with (u,j) not in
// train, drawn by rejection.
class EpochBatcher {
 public:
  EpochBatcher(const InteractionDataset& ds, std::size_t batch_size, Rng& rng)
      : ds_(ds), batch_size_(batch_size), rng_(rng) {
    if (batch_size_ < 1) {
      throw std::invalid_argument("EpochBatcher: batch_size must be >= 1");
    }
    pairs_ = ds.train;
    fisher_yates_shuffle(pairs_, rng_);
  }

  std::size_t num_batches() const {
    return (pairs_.size() + batch_size_ - 1) / batch_size_;
  }

  std::optional<MiniBatch> next() {
    if (cursor_ >= pairs_.size()) return std::nullopt;
    const std::size_t end = std::min(cursor_ + batch_size_, pairs_.size());
    MiniBatch b;
    b.triples.reserve(end - cursor_);
    for (std::size_t k = cursor_; k < end; ++k) {
      const auto [u, i] = pairs_[k];
      b.triples.push_back({u, i, sample_negative(u)});
    }
    cursor_ = end;
    b.derive_index_sets();
    return b;
  }

 private:
  int sample_negative(int u) {
    if (static_cast<int>(ds_.train_items_by_user[u].size()) >= ds_.num_items) {
      throw NegativeSamplingStall("user " + std::to_string(u) + " has interacted with every item");
    }
    while (true) {
      const int j = static_cast<int>(uniform_below(rng_, static_cast<std::uint64_t>(ds_.num_items)));
      if (!ds_.in_train(u, j)) return j;
    }
  }

  const InteractionDataset& ds_;
  std::size_t batch_size_;
  Rng& rng_;
  std::vector<std::pair<int, int>> pairs_;
  std::size_t cursor_ = 0;
};

inline std::vector<MiniBatch> sample_epoch_batches(const InteractionDataset& ds,
                                                   std::size_t batch_size, Rng& rng) {
  EpochBatcher batcher(ds, batch_size, rng);
  std::vector<MiniBatch> out;
  out.reserve(batcher.num_batches());
  while (auto b = batcher.next()) {
    out.push_back(std::move(*b));
  }
  return out;
}

}  // namespace paac

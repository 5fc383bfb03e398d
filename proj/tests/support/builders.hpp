#pragma once

// Small dataset / instance builders shared across the test suites.

#include "paac/dataset.hpp"
#include "paac/embedding.hpp"
#include "paac/sampler.hpp"

#include <utility>
#include <vector>

namespace paac::testing {

inline InteractionDataset make_dataset(int num_users, int num_items,
                                       std::vector<std::pair<int, int>> train,
                                       std::vector<std::pair<int, int>> validation = {},
                                       std::vector<std::pair<int, int>> test = {}) {
  InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  ds.train = std::move(train);
  ds.validation = std::move(validation);
  ds.test = std::move(test);
  for (int u = 0; u < num_users; ++u) ds.user_keys.push_back("u" + std::to_string(u));
  for (int i = 0; i < num_items; ++i) ds.item_keys.push_back("i" + std::to_string(i));
  ds.finalize();
  return ds;
}

// Random small dataset where every user and every item has at least one
// train interaction and no user covers all items.
inline InteractionDataset random_dataset(int num_users, int num_items, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> train;
  std::vector<char> item_hit(num_items, 0);
  for (int u = 0; u < num_users; ++u) {
    const int anchor = u % num_items;
    train.emplace_back(u, anchor);
    item_hit[anchor] = 1;
    const int extra = 1 + static_cast<int>(uniform_below(rng, std::max(1, num_items / 2)));
    for (int e = 0; e < extra; ++e) {
      const int i = static_cast<int>(uniform_below(rng, num_items));
      train.emplace_back(u, i);
      item_hit[i] = 1;
    }
  }
  for (int i = 0; i < num_items; ++i) {
    if (!item_hit[i]) train.emplace_back(i % num_users, i);
  }
  std::sort(train.begin(), train.end());
  train.erase(std::unique(train.begin(), train.end()), train.end());
  return make_dataset(num_users, num_items, std::move(train));
}

inline MiniBatch make_batch(std::vector<Triple> triples) {
  MiniBatch b;
  b.triples = std::move(triples);
  b.derive_index_sets();
  return b;
}

// One shuffled batch of the dataset's train pairs with sampled negatives.
inline MiniBatch sample_one_batch(const InteractionDataset& ds, std::size_t batch_size,
                                  std::uint64_t seed) {
  Rng rng(seed);
  EpochBatcher batcher(ds, batch_size, rng);
  return *batcher.next();
}

}  // namespace paac::testing

#pragma once

#include "paac/common.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

namespace paac {

struct RawInteraction {
  std::string user_key;
  std::string item_key;

  friend bool operator==(const RawInteraction&, const RawInteraction&) = default;
};

enum class InteractionFormat { tsv, csv };

// One interaction per line: "user<delim>item[<delim>ignored...]".
// Lines starting with '#' and blank lines are skipped.
inline std::vector<RawInteraction> load_interactions(const std::string& path,
                                                     InteractionFormat format = InteractionFormat::tsv) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open interaction file: " + path);
  }
  const char delim = format == InteractionFormat::tsv ? '\t' : ',';
  std::vector<RawInteraction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto first = line.find(delim);
    if (first == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected at least 2 fields");
    }
    std::string user = line.substr(0, first);
    const auto second = line.find(delim, first + 1);
    std::string item = second == std::string::npos ? line.substr(first + 1)
                                                   : line.substr(first + 1, second - first - 1);
    if (user.empty() || item.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty key");
    }
    out.push_back({std::move(user), std::move(item)});
  }
  return out;
}

namespace detail {

// Deduplicated interactions with contiguous ids assigned in first-appearance order.
struct IndexedInteractions {
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  std::vector<std::pair<int, int>> pairs;
};

inline IndexedInteractions index_interactions(const std::vector<RawInteraction>& raw) {
  IndexedInteractions ix;
  std::unordered_map<std::string, int> umap, imap;
  std::unordered_map<std::uint64_t, bool> seen;
  seen.reserve(raw.size() * 2);
  for (const auto& r : raw) {
    auto [uit, unew] = umap.try_emplace(r.user_key, static_cast<int>(ix.user_keys.size()));
    if (unew) ix.user_keys.push_back(r.user_key);
    auto [iit, inew] = imap.try_emplace(r.item_key, static_cast<int>(ix.item_keys.size()));
    if (inew) ix.item_keys.push_back(r.item_key);
    const std::uint64_t code = (static_cast<std::uint64_t>(uit->second) << 32) |
                               static_cast<std::uint32_t>(iit->second);
    if (seen.try_emplace(code, true).second) {
      ix.pairs.emplace_back(uit->second, iit->second);
    }
  }
  return ix;
}

}  // namespace detail

// Iteratively peels users and items with fewer than k distinct interactions
// until a fixed point. Duplicates are collapsed before counting. The result
// keeps the input's first-occurrence order.
inline std::vector<RawInteraction> k_core_filter(const std::vector<RawInteraction>& raw, int k) {
  if (k < 1) {
    throw std::invalid_argument("k_core_filter: k must be >= 1");
  }
  auto ix = detail::index_interactions(raw);
  const int m = static_cast<int>(ix.user_keys.size());
  const int n = static_cast<int>(ix.item_keys.size());
  std::vector<int> udeg(m, 0), ideg(n, 0);
  std::vector<char> alive(ix.pairs.size(), 1);
  for (const auto& [u, i] : ix.pairs) {
    ++udeg[u];
    ++ideg[i];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t e = 0; e < ix.pairs.size(); ++e) {
      if (!alive[e]) continue;
      const auto [u, i] = ix.pairs[e];
      if (udeg[u] < k || ideg[i] < k) {
        alive[e] = 0;
        --udeg[u];
        --ideg[i];
        changed = true;
      }
    }
  }
  std::vector<RawInteraction> out;
  for (std::size_t e = 0; e < ix.pairs.size(); ++e) {
    if (alive[e]) {
      out.push_back({ix.user_keys[ix.pairs[e].first], ix.item_keys[ix.pairs[e].second]});
    }
  }
  if (out.empty()) {
    throw EmptyResult("k_core_filter: no interactions survive k=" + std::to_string(k));
  }
  return out;
}

// Deduplicated user-item interactions with disjoint train/validation/test
// splits over contiguous integer ids. Every user and item keeps at least one
// training interaction.
struct InteractionDataset {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::pair<int, int>> train;
  std::vector<std::pair<int, int>> validation;
  std::vector<std::pair<int, int>> test;
  std::vector<std::string> user_keys;  // index -> key; may be synthetic after manifest load
  std::vector<std::string> item_keys;
  int test_quota = 0;  // per-item quota c used by the split builder

  // Sorted per-user item lists, rebuilt by finalize().
  std::vector<std::vector<int>> train_items_by_user;
  std::vector<std::vector<int>> validation_items_by_user;
  std::vector<std::vector<int>> test_items_by_user;

  void finalize() {
    auto build = [this](const std::vector<std::pair<int, int>>& pairs,
                        std::vector<std::vector<int>>& by_user) {
      by_user.assign(num_users, {});
      for (const auto& [u, i] : pairs) by_user[u].push_back(i);
      for (auto& v : by_user) std::sort(v.begin(), v.end());
    };
    build(train, train_items_by_user);
    build(validation, validation_items_by_user);
    build(test, test_items_by_user);
  }

  bool in_train(int u, int i) const {
    const auto& v = train_items_by_user[u];
    return std::binary_search(v.begin(), v.end(), i);
  }

  std::vector<std::int64_t> train_item_counts() const {
    std::vector<std::int64_t> c(num_items, 0);
    for (const auto& [u, i] : train) ++c[i];
    return c;
  }
};

// Builds the popularity-uniform test split plus a user/item-preserving
// validation split.
//
// Test: the largest per-item quota c >= 1 with sum_i min(c, count(i)-1)
// within the test budget; each item contributes min(c, count(i)-1) uniformly
// sampled interactions, so every item keeps at least one non-test
// interaction. Validation: uniform picks from the remainder, rejecting any
// pick that would leave a user or item with zero training interactions.
inline InteractionDataset build_unbiased_split(const std::vector<RawInteraction>& interactions,
                                               double test_fraction, double val_fraction,
                                               std::uint64_t seed) {
  if (test_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction + val_fraction >= 1.0) {
    throw std::invalid_argument("build_unbiased_split: fractions must be positive and sum below 1");
  }
  auto ix = detail::index_interactions(interactions);
  const int m = static_cast<int>(ix.user_keys.size());
  const int n = static_cast<int>(ix.item_keys.size());
  const std::size_t total = ix.pairs.size();
  if (total == 0) {
    throw EmptyResult("build_unbiased_split: no interactions");
  }

  std::vector<std::vector<std::size_t>> edges_of_item(n);
  for (std::size_t e = 0; e < total; ++e) {
    edges_of_item[ix.pairs[e].second].push_back(e);
  }

  const double test_budget = test_fraction * static_cast<double>(total);
  std::int64_t max_cap = 0;
  for (int i = 0; i < n; ++i) {
    max_cap = std::max<std::int64_t>(max_cap, static_cast<std::int64_t>(edges_of_item[i].size()) - 1);
  }
  auto quota_sum = [&](std::int64_t c) {
    std::int64_t s = 0;
    for (int i = 0; i < n; ++i) {
      s += std::min<std::int64_t>(c, static_cast<std::int64_t>(edges_of_item[i].size()) - 1);
    }
    return s;
  };
  if (static_cast<double>(quota_sum(1)) > test_budget) {
    throw InfeasibleSplit("build_unbiased_split: no per-item test quota c >= 1 fits the budget");
  }
  std::int64_t lo = 1, hi = std::max<std::int64_t>(1, max_cap);
  while (lo < hi) {  // largest c with quota_sum(c) <= budget
    const std::int64_t mid = lo + (hi - lo + 1) / 2;
    if (static_cast<double>(quota_sum(mid)) <= test_budget) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  const std::int64_t c = lo;

  Rng rng(seed);
  std::vector<char> in_test(total, 0);
  for (int i = 0; i < n; ++i) {
    auto& edges = edges_of_item[i];
    const std::size_t take = static_cast<std::size_t>(
        std::min<std::int64_t>(c, static_cast<std::int64_t>(edges.size()) - 1));
    for (std::size_t t = 0; t < take; ++t) {  // partial Fisher-Yates
      const std::size_t pick = t + uniform_below(rng, edges.size() - t);
      std::swap(edges[t], edges[pick]);
      in_test[edges[t]] = 1;
    }
  }

  std::vector<std::size_t> remainder;
  remainder.reserve(total);
  std::vector<std::int64_t> ucnt(m, 0), icnt(n, 0);
  for (std::size_t e = 0; e < total; ++e) {
    if (!in_test[e]) {
      remainder.push_back(e);
      ++ucnt[ix.pairs[e].first];
      ++icnt[ix.pairs[e].second];
    }
  }
  const std::size_t val_target = static_cast<std::size_t>(val_fraction * static_cast<double>(total));
  fisher_yates_shuffle(remainder, rng);
  std::vector<char> in_val(total, 0);
  std::size_t taken = 0;
  for (std::size_t idx = 0; idx < remainder.size() && taken < val_target; ++idx) {
    const std::size_t e = remainder[idx];
    const auto [u, i] = ix.pairs[e];
    if (ucnt[u] > 1 && icnt[i] > 1) {
      in_val[e] = 1;
      --ucnt[u];
      --icnt[i];
      ++taken;
    }
  }
  if (taken < val_target) {
    throw InfeasibleSplit("build_unbiased_split: validation target unreachable without emptying a user or item");
  }

  InteractionDataset ds;
  ds.num_users = m;
  ds.num_items = n;
  ds.user_keys = std::move(ix.user_keys);
  ds.item_keys = std::move(ix.item_keys);
  ds.test_quota = static_cast<int>(c);
  for (std::size_t e = 0; e < total; ++e) {
    if (in_test[e]) {
      ds.test.push_back(ix.pairs[e]);
    } else if (in_val[e]) {
      ds.validation.push_back(ix.pairs[e]);
    } else {
      ds.train.push_back(ix.pairs[e]);
    }
  }
  for (std::int64_t k : ucnt) {
    if (k <= 0) throw InfeasibleSplit("build_unbiased_split: a user lost every training interaction");
  }
  for (std::int64_t k : icnt) {
    if (k <= 0) throw InfeasibleSplit("build_unbiased_split: an item lost every training interaction");
  }
  ds.finalize();
  return ds;
}

inline void write_pair_file(const std::string& path, const std::vector<std::pair<int, int>>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [u, i] : pairs) {
    out << u << ' ' << i << '\n';
  }
}

inline std::vector<std::pair<int, int>> read_pair_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int u, i;
    if (!(ss >> u >> i)) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected 'user_index item_index'");
    }
    pairs.emplace_back(u, i);
  }
  return pairs;
}

inline void write_key_file(const std::string& path, const std::vector<std::string>& keys) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& k : keys) out << k << '\n';
}

}  // namespace paac

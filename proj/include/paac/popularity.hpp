#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace paac {

// Mean absolute difference of counts over twice the mean:
//   sum_ij |p(i)-p(j)| / (2 N^2 mean).
// Computed via the sorted prefix form; 0 for perfectly equal counts.
inline double gini_from_counts(const std::vector<std::int64_t>& counts) {
  const std::size_t n = counts.size();
  if (n == 0) return 0.0;
  std::vector<std::int64_t> sorted(counts);
  std::sort(sorted.begin(), sorted.end());
  const double total = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), std::int64_t{0}));
  if (total <= 0.0) return 0.0;
  double acc = 0.0;  // sum_k (2k - n - 1) p_(k), ascending, 1-indexed
  for (std::size_t k = 1; k <= n; ++k) {
    acc += (2.0 * static_cast<double>(k) - static_cast<double>(n) - 1.0) *
           static_cast<double>(sorted[k - 1]);
  }
  const double mean = total / static_cast<double>(n);
  return acc / (static_cast<double>(n) * static_cast<double>(n) * mean);
}

// Per-item training popularity p(i) with the derived order and dispersion stats.
struct PopularityIndex {
  std::vector<std::int64_t> counts;  // p(i), train interactions per item
  std::vector<int> order;            // item ids sorted by (count desc, id asc)
  double gini = 0.0;
  std::int64_t max_count = 0;
  std::int64_t min_count = 0;
  double mean_count = 0.0;

  bool more_popular(int a, int b) const {
    return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
  }
};

inline PopularityIndex build_popularity_index(const InteractionDataset& ds) {
  if (ds.train.empty()) {
    throw std::invalid_argument("build_popularity_index: empty train split");
  }
  PopularityIndex pi;
  pi.counts = ds.train_item_counts();
  pi.order.resize(ds.num_items);
  std::iota(pi.order.begin(), pi.order.end(), 0);
  std::sort(pi.order.begin(), pi.order.end(),
            [&](int a, int b) { return pi.more_popular(a, b); });
  pi.gini = gini_from_counts(pi.counts);
  pi.max_count = *std::max_element(pi.counts.begin(), pi.counts.end());
  pi.min_count = *std::min_element(pi.counts.begin(), pi.counts.end());
  pi.mean_count = static_cast<double>(ds.train.size()) / static_cast<double>(ds.num_items);
  return pi;
}

// Disjoint popular/unpopular halves of an item set; pop holds the top
// ceil(x% * |items|) by (count desc, id asc).
struct GroupSplit {
  std::vector<int> pop;
  std::vector<int> unpop;
};

inline GroupSplit split_by_popularity(std::vector<int> items, const PopularityIndex& pop_index,
                                      double x_ratio) {
  std::sort(items.begin(), items.end(),
            [&](int a, int b) { return pop_index.more_popular(a, b); });
  const std::size_t n = items.size();
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(x_ratio * static_cast<double>(n) / 100.0));
  GroupSplit gs;
  gs.pop.assign(items.begin(), items.begin() + std::min(k, n));
  gs.unpop.assign(items.begin() + std::min(k, n), items.end());
  return gs;
}

// Pareto labeling over all items: the top pct% by train popularity
// (ceil, ties by ascending id) are flagged popular.
inline std::vector<char> pareto_popular_flags(const PopularityIndex& pop_index, double pct) {
  const std::size_t n = pop_index.order.size();
  const std::size_t k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(pct * static_cast<double>(n) / 100.0)));
  std::vector<char> flags(n, 0);
  for (std::size_t r = 0; r < k; ++r) flags[pop_index.order[r]] = 1;
  return flags;
}

}  // namespace paac

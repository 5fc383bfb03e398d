#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"
#include "paac/graph.hpp"
#include "paac/popularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace paac {

// Which split supplies the ground truth. Test ranking masks train and
// validation items; validation ranking masks train items only.
enum class EvalTarget { test, validation };

struct RankingResult {
  std::vector<int> users;                   // evaluated users, ascending
  std::vector<std::vector<int>> top_items;  // per user, score desc, id asc on ties
  std::vector<int> k_values;
  int max_k = 0;
};

// Full ranking: every user with at least one target item scores all items by
// dot product, with seen items masked out.
inline RankingResult rank_all(const PropagatedEmbeddings& prop, const InteractionDataset& ds,
                              std::vector<int> k_values, EvalTarget target = EvalTarget::test) {
  RankingResult res;
  res.k_values = std::move(k_values);
  res.max_k = *std::max_element(res.k_values.begin(), res.k_values.end());
  if (res.max_k > ds.num_items) {
    throw std::invalid_argument("rank_all: K exceeds the number of items");
  }
  const auto& target_items =
      target == EvalTarget::test ? ds.test_items_by_user : ds.validation_items_by_user;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(ds.num_items);
  std::vector<int> idx(ds.num_items);
  for (int u = 0; u < ds.num_users; ++u) {
    if (target_items[u].empty()) continue;
    Eigen::Map<Vec>(scores.data(), ds.num_items) = prop.item_final * prop.user_final.row(u).transpose();
    for (int i : ds.train_items_by_user[u]) scores[i] = neg_inf;
    if (target == EvalTarget::test) {
      for (int i : ds.validation_items_by_user[u]) scores[i] = neg_inf;
    }
    std::iota(idx.begin(), idx.end(), 0);
    const auto k = std::min<std::size_t>(res.max_k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    res.users.push_back(u);
    res.top_items.emplace_back(idx.begin(), idx.begin() + k);
  }
  return res;
}

struct OverallMetrics {
  double recall = 0.0;
  double hr = 0.0;
  double ndcg = 0.0;
  int num_users = 0;
};

namespace detail {

inline double dcg_weight(int rank_1based) {
  return 1.0 / std::log2(static_cast<double>(rank_1based) + 1.0);
}

inline double ideal_dcg(int num_relevant, int k) {
  double s = 0.0;
  for (int r = 1; r <= std::min(num_relevant, k); ++r) s += dcg_weight(r);
  return s;
}

}  // namespace detail

// Recall@K = |topK ∩ G| / |G|; HR@K = at least one hit; NDCG@K with binary
// relevance; means over evaluated users.
inline OverallMetrics compute_metrics(const RankingResult& ranking, const InteractionDataset& ds,
                                      int k, EvalTarget target = EvalTarget::test) {
  if (k < 1) throw std::invalid_argument("compute_metrics: K must be >= 1");
  const auto& target_items =
      target == EvalTarget::test ? ds.test_items_by_user : ds.validation_items_by_user;
  OverallMetrics m;
  for (std::size_t ui = 0; ui < ranking.users.size(); ++ui) {
    const auto& truth = target_items[ranking.users[ui]];
    if (truth.empty()) continue;
    const auto& top = ranking.top_items[ui];
    const int depth = std::min<int>(k, static_cast<int>(top.size()));
    int hits = 0;
    double dcg = 0.0;
    for (int r = 0; r < depth; ++r) {
      if (std::binary_search(truth.begin(), truth.end(), top[r])) {
        ++hits;
        dcg += detail::dcg_weight(r + 1);
      }
    }
    m.recall += static_cast<double>(hits) / static_cast<double>(truth.size());
    m.hr += hits > 0 ? 1.0 : 0.0;
    m.ndcg += dcg / detail::ideal_dcg(static_cast<int>(truth.size()), k);
    ++m.num_users;
  }
  if (m.num_users > 0) {
    m.recall /= m.num_users;
    m.hr /= m.num_users;
    m.ndcg /= m.num_users;
  }
  return m;
}

struct GroupMetrics {
  std::optional<OverallMetrics> popular;
  std::optional<OverallMetrics> unpopular;
  // popular minus unpopular; present only when both groups were evaluated
  std::optional<double> delta_recall;
  std::optional<double> delta_hr;
  std::optional<double> delta_ndcg;
};

// Per-popularity-group metrics: the top pareto_pct% items (train popularity)
// are Popular. Both the recommended hits and the user's ground truth are
// restricted to the group; hits keep their positions from the full list.
// Users with no ground-truth items in a group are skipped for that group.
inline GroupMetrics group_metrics(const RankingResult& ranking, const InteractionDataset& ds,
                                  const PopularityIndex& pop_index, int k,
                                  double pareto_pct = 20.0, EvalTarget target = EvalTarget::test) {
  const std::vector<char> popular = pareto_popular_flags(pop_index, pareto_pct);
  const auto& target_items =
      target == EvalTarget::test ? ds.test_items_by_user : ds.validation_items_by_user;
  OverallMetrics acc[2];  // [0] popular, [1] unpopular
  for (std::size_t ui = 0; ui < ranking.users.size(); ++ui) {
    const auto& truth = target_items[ranking.users[ui]];
    const auto& top = ranking.top_items[ui];
    const int depth = std::min<int>(k, static_cast<int>(top.size()));
    for (int g = 0; g < 2; ++g) {
      const char want = g == 0 ? 1 : 0;
      int truth_in_group = 0;
      for (int i : truth) truth_in_group += popular[i] == want;
      if (truth_in_group == 0) continue;
      int hits = 0;
      double dcg = 0.0;
      for (int r = 0; r < depth; ++r) {
        const int item = top[r];
        if (popular[item] == want && std::binary_search(truth.begin(), truth.end(), item)) {
          ++hits;
          dcg += detail::dcg_weight(r + 1);
        }
      }
      acc[g].recall += static_cast<double>(hits) / static_cast<double>(truth_in_group);
      acc[g].hr += hits > 0 ? 1.0 : 0.0;
      acc[g].ndcg += dcg / detail::ideal_dcg(truth_in_group, k);
      ++acc[g].num_users;
    }
  }
  GroupMetrics gm;
  for (int g = 0; g < 2; ++g) {
    if (acc[g].num_users == 0) continue;
    acc[g].recall /= acc[g].num_users;
    acc[g].hr /= acc[g].num_users;
    acc[g].ndcg /= acc[g].num_users;
    (g == 0 ? gm.popular : gm.unpopular) = acc[g];
  }
  if (gm.popular && gm.unpopular) {
    gm.delta_recall = gm.popular->recall - gm.unpopular->recall;
    gm.delta_hr = gm.popular->hr - gm.unpopular->hr;
    gm.delta_ndcg = gm.popular->ndcg - gm.unpopular->ndcg;
  }
  return gm;
}

}  // namespace paac

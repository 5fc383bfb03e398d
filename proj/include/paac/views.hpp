#pragma once

#include "paac/common.hpp"
#include "paac/graph.hpp"

#include <algorithm>
#include <vector>

namespace paac {

namespace detail {

// SimGCL-style perturbation: delta is a uniform-sphere direction (normalized
// i.i.d. uniforms), added sign-aligned with magnitude eps, then the row is
// normalized to unit length. Returns the pre-normalization norm, which the
// backward pass needs.
template <typename RowIn, typename RowOut>
double perturb_row(const RowIn& e, double eps, Rng& rng, RowOut out) {
  const Eigen::Index d = e.size();
  Vec delta(d);
  for (Eigen::Index k = 0; k < d; ++k) delta[k] = uniform01(rng);
  const double dn = delta.norm();
  if (dn > 0.0) delta /= dn;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double s = e[k] > 0.0 ? 1.0 : (e[k] < 0.0 ? -1.0 : 0.0);
    out[k] = e[k] + eps * s * delta[k];
  }
  const double wn = out.norm();
  if (wn > 0.0) out /= wn;
  return wn;
}

// Chain rule through v = w / |w|: dL/dw = (g - (g.v) v) / |w|.
template <typename RowG, typename RowV, typename RowOut>
void unnormalize_grad(const RowG& g, const RowV& v, double wnorm, RowOut out) {
  if (wnorm <= 0.0) return;
  out += (g - g.dot(v) * v) / wnorm;
}

}  // namespace detail

// Two independently perturbed, row-unit-normalized views of every user and
// item embedding.
struct ContrastViews {
  Mat users_v1, users_v2;  // M x D
  Mat items_v1, items_v2;  // N x D
  Vec users_w1, users_w2;  // pre-normalization norms
  Vec items_w1, items_w2;
  double epsilon = 0.0;
};

// Draw order is fixed: users ascending then items ascending, view 1 before
// view 2 within a row.
inline ContrastViews make_views(const PropagatedEmbeddings& prop, double epsilon, Rng& rng) {
  if (epsilon < 0.0) {
    throw std::invalid_argument("make_views: epsilon must be >= 0");
  }
  ContrastViews v;
  v.epsilon = epsilon;
  const Eigen::Index m = prop.user_final.rows();
  const Eigen::Index n = prop.item_final.rows();
  const Eigen::Index d = prop.user_final.cols();
  v.users_v1.resize(m, d);
  v.users_v2.resize(m, d);
  v.items_v1.resize(n, d);
  v.items_v2.resize(n, d);
  v.users_w1.resize(m);
  v.users_w2.resize(m);
  v.items_w1.resize(n);
  v.items_w2.resize(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    v.users_w1[r] = detail::perturb_row(prop.user_final.row(r), epsilon, rng, v.users_v1.row(r));
    v.users_w2[r] = detail::perturb_row(prop.user_final.row(r), epsilon, rng, v.users_v2.row(r));
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    v.items_w1[r] = detail::perturb_row(prop.item_final.row(r), epsilon, rng, v.items_v1.row(r));
    v.items_w2[r] = detail::perturb_row(prop.item_final.row(r), epsilon, rng, v.items_v2.row(r));
  }
  return v;
}

// Views restricted to the rows a batch touches; the training path uses this
// so steps stay O(batch) instead of O(M+N). Same per-row construction and
// draw order (users ascending, then items ascending) as make_views.
struct BatchViews {
  std::vector<int> user_ids;  // sorted global ids
  std::vector<int> item_ids;
  Mat users_v1, users_v2;  // |user_ids| x D
  Mat items_v1, items_v2;  // |item_ids| x D
  Vec users_w1, users_w2;
  Vec items_w1, items_w2;
  double epsilon = 0.0;

  int user_local(int u) const {
    return static_cast<int>(std::lower_bound(user_ids.begin(), user_ids.end(), u) - user_ids.begin());
  }
  int item_local(int i) const {
    return static_cast<int>(std::lower_bound(item_ids.begin(), item_ids.end(), i) - item_ids.begin());
  }
};

// Chains view-space gradients back onto the final embeddings: users land at
// row u, items at row num_users + i of grad_final.
inline void fold_view_gradients(const BatchViews& views, const Mat& d_users_v1,
                                const Mat& d_users_v2, const Mat& d_items_v1,
                                const Mat& d_items_v2, int num_users, Mat& grad_final) {
  for (std::size_t k = 0; k < views.user_ids.size(); ++k) {
    const int u = views.user_ids[k];
    detail::unnormalize_grad(d_users_v1.row(k), views.users_v1.row(k), views.users_w1[k],
                             grad_final.row(u));
    detail::unnormalize_grad(d_users_v2.row(k), views.users_v2.row(k), views.users_w2[k],
                             grad_final.row(u));
  }
  for (std::size_t k = 0; k < views.item_ids.size(); ++k) {
    const int i = views.item_ids[k];
    detail::unnormalize_grad(d_items_v1.row(k), views.items_v1.row(k), views.items_w1[k],
                             grad_final.row(num_users + i));
    detail::unnormalize_grad(d_items_v2.row(k), views.items_v2.row(k), views.items_w2[k],
                             grad_final.row(num_users + i));
  }
}

inline BatchViews make_batch_views(const PropagatedEmbeddings& prop, double epsilon, Rng& rng,
                                   std::vector<int> user_ids, std::vector<int> item_ids) {
  BatchViews v;
  v.epsilon = epsilon;
  v.user_ids = std::move(user_ids);
  v.item_ids = std::move(item_ids);
  const Eigen::Index d = prop.user_final.cols();
  const Eigen::Index mu = static_cast<Eigen::Index>(v.user_ids.size());
  const Eigen::Index ni = static_cast<Eigen::Index>(v.item_ids.size());
  v.users_v1.resize(mu, d);
  v.users_v2.resize(mu, d);
  v.items_v1.resize(ni, d);
  v.items_v2.resize(ni, d);
  v.users_w1.resize(mu);
  v.users_w2.resize(mu);
  v.items_w1.resize(ni);
  v.items_w2.resize(ni);
  for (Eigen::Index r = 0; r < mu; ++r) {
    const auto base = prop.user_final.row(v.user_ids[r]);
    v.users_w1[r] = detail::perturb_row(base, epsilon, rng, v.users_v1.row(r));
    v.users_w2[r] = detail::perturb_row(base, epsilon, rng, v.users_v2.row(r));
  }
  for (Eigen::Index r = 0; r < ni; ++r) {
    const auto base = prop.item_final.row(v.item_ids[r]);
    v.items_w1[r] = detail::perturb_row(base, epsilon, rng, v.items_v1.row(r));
    v.items_w2[r] = detail::perturb_row(base, epsilon, rng, v.items_v2.row(r));
  }
  return v;
}

}  // namespace paac

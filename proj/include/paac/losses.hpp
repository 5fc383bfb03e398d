#pragma once

#include "paac/common.hpp"
#include "paac/graph.hpp"
#include "paac/popularity.hpp"
#include "paac/sampler.hpp"
#include "paac/views.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace paac {

struct Hyperparams {
  double lambda1 = 1.0;   // supervised alignment weight
  double lambda2 = 1.0;   // contrastive weight
  double lambda3 = 1e-4;  // L2 coefficient
  double gamma = 0.5;     // popular-anchor weight in the item contrast
  double beta = 0.5;      // cross-group negative damping
  double x_ratio = 50.0;  // top x% of batch items count as popular
  double tau = 0.2;       // InfoNCE temperature
  double epsilon = 0.1;   // view perturbation magnitude
  int layers = 2;
  double lr = 0.001;
  int dim = 64;
  int batch_size = 2048;
  int epochs = 100;
  std::uint64_t seed = 42;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ConfigError("lambda weights must be >= 0");
    if (gamma < 0 || gamma > 1) throw ConfigError("gamma must be in [0,1]");
    if (beta < 0 || beta > 1) throw ConfigError("beta must be in [0,1]");
    if (x_ratio <= 0 || x_ratio >= 100) throw ConfigError("x_ratio must be in (0,100)");
    if (tau <= 0) throw ConfigError("tau must be > 0");
    if (epsilon < 0) throw ConfigError("epsilon must be >= 0");
    if (layers < 0) throw ConfigError("layers must be >= 0");
    if (lr <= 0) throw ConfigError("lr must be > 0");
    if (dim < 1 || batch_size < 1 || epochs < 1) throw ConfigError("dim, batch_size, epochs must be >= 1");
  }
};

struct LossBreakdown {
  double rec = 0.0;
  double sa = 0.0;
  double cl_item = 0.0;
  double cl_pop = 0.0;
  double cl_unpop = 0.0;
  double cl_user = 0.0;
  double cl_total = 0.0;
  double reg = 0.0;
  double total = 0.0;

  // Name of the first non-finite component, or nullptr if all are finite.
  const char* first_non_finite() const {
    if (!std::isfinite(rec)) return "rec";
    if (!std::isfinite(sa)) return "sa";
    if (!std::isfinite(cl_pop)) return "cl_pop";
    if (!std::isfinite(cl_unpop)) return "cl_unpop";
    if (!std::isfinite(cl_user)) return "cl_user";
    if (!std::isfinite(reg)) return "reg";
    if (!std::isfinite(total)) return "total";
    return nullptr;
  }
};

// Gradient w.r.t. the layer-0 embedding tables.
struct GradientSet {
  Mat d_user_base;  // M x D
  Mat d_item_base;  // N x D
};

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// -(1/|B|) sum ln sigmoid(s(u,i) - s(u,j)); grad accumulates on the final
// embeddings (users at row u, items at row M + i), scaled by grad_scale.
inline double bpr_loss(const MiniBatch& batch, const PropagatedEmbeddings& prop,
                       Mat* grad_final = nullptr, double grad_scale = 1.0) {
  if (batch.triples.empty()) {
    throw std::invalid_argument("bpr_loss: empty batch");
  }
  const int m = static_cast<int>(prop.user_final.rows());
  const double inv = 1.0 / static_cast<double>(batch.triples.size());
  double loss = 0.0;
  for (const auto& t : batch.triples) {
    const auto zu = prop.user_final.row(t.user);
    const auto hi = prop.item_final.row(t.pos);
    const auto hj = prop.item_final.row(t.neg);
    const double x = zu.dot(hi) - zu.dot(hj);
    loss += softplus(-x);  // -ln sigmoid(x)
    if (grad_final) {
      const double c = -grad_scale * inv / (1.0 + std::exp(x));  // d/dx of -inv*ln sigmoid
      grad_final->row(t.user) += c * (hi - hj);
      grad_final->row(m + t.pos) += c * zu;
      grad_final->row(m + t.neg) -= c * zu;
    }
  }
  return loss * inv;
}

// sum_u (1/|I_u|) sum_{i in pop, i' in unpop} |f(i) - f(i')|^2 over each
// user's batch positives, split by global popularity; users with an empty
// group side contribute zero. f is the unperturbed final item embedding.
inline double supervised_alignment_loss(const MiniBatch& batch, const PropagatedEmbeddings& prop,
                                        const PopularityIndex& pop_index, double x_ratio,
                                        Mat* grad_final = nullptr, double grad_scale = 1.0) {
  const int m = static_cast<int>(prop.user_final.rows());
  const Eigen::Index d = prop.item_final.cols();
  double loss = 0.0;
  Vec sum_pop(d), sum_unpop(d);
  for (std::size_t k = 0; k < batch.batch_users.size(); ++k) {
    const auto& items = batch.per_user_items[k];
    if (items.size() < 2) continue;
    const GroupSplit gs = split_by_popularity(items, pop_index, x_ratio);
    if (gs.pop.empty() || gs.unpop.empty()) continue;
    const double inv = 1.0 / static_cast<double>(items.size());
    const auto np = static_cast<double>(gs.pop.size());
    const auto nq = static_cast<double>(gs.unpop.size());
    sum_pop.setZero();
    sum_unpop.setZero();
    double sq_pop = 0.0, sq_unpop = 0.0;
    for (int i : gs.pop) {
      sum_pop += prop.item_final.row(i);
      sq_pop += prop.item_final.row(i).squaredNorm();
    }
    for (int i : gs.unpop) {
      sum_unpop += prop.item_final.row(i);
      sq_unpop += prop.item_final.row(i).squaredNorm();
    }
    loss += inv * (nq * sq_pop + np * sq_unpop - 2.0 * sum_pop.dot(sum_unpop));
    if (grad_final) {
      const double s = 2.0 * grad_scale * inv;
      for (int i : gs.pop) {
        grad_final->row(m + i) += s * (nq * prop.item_final.row(i) - sum_unpop.transpose());
      }
      for (int i : gs.unpop) {
        grad_final->row(m + i) += s * (np * prop.item_final.row(i) - sum_pop.transpose());
      }
    }
  }
  return loss;
}

// Re-weighted InfoNCE over a precomputed similarity matrix S = V1 V2^T
// (local row indexing). For each anchor a:
//   -log[ exp(S_aa/tau) / (sum_{j in same} exp(S_aj/tau)
//                          + beta sum_{j in other} exp(S_aj/tau)) ]
// with the positive j = a inside the same-group sum; log-sum-exp stabilized.
// anchors must be a subset of same. dS accumulates d(loss)/dS * grad_scale.
inline double reweighted_infonce_sims(const Mat& sims, const std::vector<int>& anchors,
                                      const std::vector<int>& same, const std::vector<int>& other,
                                      double tau, double beta, Mat* d_sims = nullptr,
                                      double grad_scale = 1.0) {
  if (tau <= 0.0) {
    throw std::invalid_argument("reweighted_infonce: tau must be > 0");
  }
  const Eigen::Index cols = sims.cols();
  // Column weights: 1 for the same group, beta for the other group, 0 for
  // columns outside both; the max is taken over the weighted support.
  Eigen::ArrayXd weights = Eigen::ArrayXd::Zero(cols);
  Eigen::ArrayXd support = Eigen::ArrayXd::Zero(cols);
  for (int j : same) {
    weights[j] = 1.0;
    support[j] = 1.0;
  }
  if (beta > 0.0) {
    for (int j : other) {
      weights[j] = beta;
      support[j] = 1.0;
    }
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double loss = 0.0;
  Eigen::ArrayXd row(cols), shifted(cols);
  for (int a : anchors) {
    row = sims.row(a).transpose().array() / tau;
    const double mx = (support > 0.0).select(row, neg_inf).maxCoeff();
    shifted = (support > 0.0).select((row - mx).exp() * weights, 0.0);
    const double z = shifted.sum();
    loss += -row[a] + mx + std::log(z);
    if (d_sims) {
      d_sims->row(a).array() += (grad_scale / (tau * z)) * shifted.transpose();
      (*d_sims)(a, a) -= grad_scale / tau;
    }
  }
  return loss;
}

// Convenience wrapper over explicit view matrices (rows aligned between V1
// and V2); used directly by tests and by the user-side loss.
inline double reweighted_infonce(const std::vector<int>& anchors, const std::vector<int>& same,
                                 const std::vector<int>& other, const Mat& v1, const Mat& v2,
                                 double tau, double beta, Mat* d_v1 = nullptr, Mat* d_v2 = nullptr,
                                 double grad_scale = 1.0) {
  const Mat sims = v1 * v2.transpose();
  if (!d_v1 && !d_v2) {
    return reweighted_infonce_sims(sims, anchors, same, other, tau, beta);
  }
  Mat d_sims = Mat::Zero(sims.rows(), sims.cols());
  const double loss =
      reweighted_infonce_sims(sims, anchors, same, other, tau, beta, &d_sims, grad_scale);
  if (d_v1) *d_v1 += d_sims * v2;
  if (d_v2) *d_v2 += d_sims.transpose() * v1;
  return loss;
}

struct ItemClResult {
  double cl_pop = 0.0;
  double cl_unpop = 0.0;
  double cl_item = 0.0;
};

// Splits the batch items by global popularity (top x%) and evaluates both
// group losses; cl_item = gamma * cl_pop + (1 - gamma) * cl_unpop. The drop_*
// flags implement the ablations that remove one group's term.
inline ItemClResult cl_item_loss(const MiniBatch& batch, const BatchViews& views,
                                 const PopularityIndex& pop_index, const Hyperparams& hp,
                                 Mat* d_items_v1 = nullptr, Mat* d_items_v2 = nullptr,
                                 double grad_scale = 1.0, bool drop_pop = false,
                                 bool drop_unpop = false) {
  ItemClResult res;
  if (batch.batch_items.empty()) return res;
  const GroupSplit gs = split_by_popularity(batch.batch_items, pop_index, hp.x_ratio);
  std::vector<int> pop_local, unpop_local;
  pop_local.reserve(gs.pop.size());
  unpop_local.reserve(gs.unpop.size());
  for (int i : gs.pop) pop_local.push_back(views.item_local(i));
  for (int i : gs.unpop) unpop_local.push_back(views.item_local(i));

  const Mat sims = views.items_v1 * views.items_v2.transpose();
  const bool want_grad = d_items_v1 || d_items_v2;
  Mat d_sims;
  if (want_grad) d_sims = Mat::Zero(sims.rows(), sims.cols());
  if (!drop_pop) {
    res.cl_pop = reweighted_infonce_sims(sims, pop_local, pop_local, unpop_local, hp.tau, hp.beta,
                                         want_grad ? &d_sims : nullptr, grad_scale * hp.gamma);
  }
  if (!drop_unpop) {
    res.cl_unpop =
        reweighted_infonce_sims(sims, unpop_local, unpop_local, pop_local, hp.tau, hp.beta,
                                want_grad ? &d_sims : nullptr, grad_scale * (1.0 - hp.gamma));
  }
  res.cl_item = hp.gamma * res.cl_pop + (1.0 - hp.gamma) * res.cl_unpop;
  if (want_grad) {
    if (d_items_v1) *d_items_v1 += d_sims * views.items_v2;
    if (d_items_v2) *d_items_v2 += d_sims.transpose() * views.items_v1;
  }
  return res;
}

// Plain InfoNCE over the batch users: every batch user is an anchor, all
// batch users form the candidate pool, no re-weighting.
inline double cl_user_loss(const MiniBatch& batch, const BatchViews& views, double tau,
                           Mat* d_users_v1 = nullptr, Mat* d_users_v2 = nullptr,
                           double grad_scale = 1.0) {
  const std::size_t n = views.user_ids.size();
  if (n == 0) return 0.0;
  std::vector<int> all(n);
  for (std::size_t k = 0; k < n; ++k) all[k] = static_cast<int>(k);
  return reweighted_infonce(all, all, {}, views.users_v1, views.users_v2, tau, 1.0, d_users_v1,
                            d_users_v2, grad_scale);
}

// lambda3 * sum |theta|^2 over the base rows of the users and items the
// batch touches (positives and sampled negatives), each row counted once.
inline double l2_reg(const EmbeddingState& state, const MiniBatch& batch, double lambda3,
                     GradientSet* grad = nullptr) {
  std::vector<int> items = batch.batch_items;
  for (const auto& t : batch.triples) items.push_back(t.neg);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  double sq = 0.0;
  for (int u : batch.batch_users) {
    sq += state.user_base.row(u).squaredNorm();
    if (grad) grad->d_user_base.row(u) += 2.0 * lambda3 * state.user_base.row(u);
  }
  for (int i : items) {
    sq += state.item_base.row(i).squaredNorm();
    if (grad) grad->d_item_base.row(i) += 2.0 * lambda3 * state.item_base.row(i);
  }
  return lambda3 * sq;
}

struct TotalLossOptions {
  bool drop_pop_cl = false;
  bool drop_unpop_cl = false;
  bool drop_alignment = false;
};

// Full objective for one batch:
//   total = rec + lambda1 * sa + lambda2 * (cl_item + cl_user)/2 + reg,
// with the gradient pulled back through view normalization and the
// propagation chain to the layer-0 tables. Noise is redrawn every call and
// treated as a constant of the step. When lambda1 (resp. lambda2) is zero
// the alignment (resp. contrast and its views) is skipped and logged as 0.
inline std::pair<LossBreakdown, GradientSet> total_loss(const MiniBatch& batch,
                                                        const EmbeddingState& state,
                                                        const NormalizedAdjacency& adj,
                                                        const PopularityIndex& pop_index,
                                                        const Hyperparams& hp, Rng& rng,
                                                        const TotalLossOptions& opts = {}) {
  const int m = state.num_users();
  const int n = state.num_items();
  const PropagatedEmbeddings prop = propagate(state, adj, hp.layers);
  Mat grad_final = Mat::Zero(m + n, state.dim);

  LossBreakdown lb;
  lb.rec = bpr_loss(batch, prop, &grad_final);
  if (hp.lambda1 > 0.0 && !opts.drop_alignment) {
    lb.sa = supervised_alignment_loss(batch, prop, pop_index, hp.x_ratio, &grad_final, hp.lambda1);
  }
  if (hp.lambda2 > 0.0) {
    BatchViews views =
        make_batch_views(prop, hp.epsilon, rng, batch.batch_users, batch.batch_items);
    Mat d_iv1 = Mat::Zero(views.items_v1.rows(), state.dim);
    Mat d_iv2 = Mat::Zero(views.items_v2.rows(), state.dim);
    Mat d_uv1 = Mat::Zero(views.users_v1.rows(), state.dim);
    Mat d_uv2 = Mat::Zero(views.users_v2.rows(), state.dim);
    const double cl_scale = hp.lambda2 * 0.5;
    const ItemClResult icl = cl_item_loss(batch, views, pop_index, hp, &d_iv1, &d_iv2, cl_scale,
                                          opts.drop_pop_cl, opts.drop_unpop_cl);
    lb.cl_pop = icl.cl_pop;
    lb.cl_unpop = icl.cl_unpop;
    lb.cl_item = icl.cl_item;
    lb.cl_user = cl_user_loss(batch, views, hp.tau, &d_uv1, &d_uv2, cl_scale);
    fold_view_gradients(views, d_uv1, d_uv2, d_iv1, d_iv2, m, grad_final);
  }
  lb.cl_total = 0.5 * (lb.cl_item + lb.cl_user);

  GradientSet grad;
  backprop_propagation(adj, hp.layers, grad_final, grad.d_user_base, grad.d_item_base);
  lb.reg = l2_reg(state, batch, hp.lambda3, &grad);
  lb.total = lb.rec + hp.lambda1 * lb.sa + hp.lambda2 * lb.cl_total + lb.reg;
  return {lb, std::move(grad)};
}

}  // namespace paac

#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"
#include "paac/embedding.hpp"
#include "paac/graph.hpp"
#include "paac/losses.hpp"
#include "paac/metrics.hpp"
#include "paac/popularity.hpp"
#include "paac/sampler.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace paac {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and embedding files are little-endian");

// Per-row Adam moments. Rows untouched by a step keep their moments and
// step counters, so sparse updates stay exact.
struct AdamState {
  Mat m_user, v_user;
  Mat m_item, v_item;
  std::vector<std::int64_t> t_user, t_item;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(int num_users, int num_items, int dim) {
    AdamState a;
    a.m_user = Mat::Zero(num_users, dim);
    a.v_user = Mat::Zero(num_users, dim);
    a.m_item = Mat::Zero(num_items, dim);
    a.v_item = Mat::Zero(num_items, dim);
    a.t_user.assign(num_users, 0);
    a.t_item.assign(num_items, 0);
    return a;
  }
};

namespace detail {

inline void adam_update_rows(Mat& param, Mat& m, Mat& v, std::vector<std::int64_t>& t,
                             const Mat& grad, const AdamState& a, double lr) {
  for (Eigen::Index r = 0; r < param.rows(); ++r) {
    if ((grad.row(r).array() == 0.0).all()) continue;
    const auto g = grad.row(r).array();
    ++t[r];
    m.row(r).array() = a.beta1 * m.row(r).array() + (1.0 - a.beta1) * g;
    v.row(r).array() = a.beta2 * v.row(r).array() + (1.0 - a.beta2) * g.square();
    const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(t[r]));
    const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(t[r]));
    param.row(r).array() -=
        lr * (m.row(r).array() / bc1) / ((v.row(r).array() / bc2).sqrt() + a.eps);
  }
}

}  // namespace detail

// One optimization step: total loss, finiteness check, bias-corrected Adam
// on every touched row.
inline LossBreakdown train_step(EmbeddingState& state, AdamState& adam,
                                const NormalizedAdjacency& adj, const MiniBatch& batch,
                                const PopularityIndex& pop_index, const Hyperparams& hp, Rng& rng,
                                const TotalLossOptions& opts = {}) {
  auto [lb, grad] = total_loss(batch, state, adj, pop_index, hp, rng, opts);
  if (const char* bad = lb.first_non_finite()) {
    throw NonFiniteLoss(std::string("non-finite loss component: ") + bad);
  }
  detail::adam_update_rows(state.user_base, adam.m_user, adam.v_user, adam.t_user,
                           grad.d_user_base, adam, hp.lr);
  detail::adam_update_rows(state.item_base, adam.m_item, adam.v_item, adam.t_item,
                           grad.d_item_base, adam, hp.lr);
  return lb;
}

enum class Ablation { full, no_pop_cl, no_unpop_cl, no_alignment };

inline TotalLossOptions ablation_options(Ablation a) {
  TotalLossOptions opts;
  switch (a) {
    case Ablation::full:
      break;
    case Ablation::no_pop_cl:
      opts.drop_pop_cl = true;
      break;
    case Ablation::no_unpop_cl:
      opts.drop_unpop_cl = true;
      break;
    case Ablation::no_alignment:
      opts.drop_alignment = true;
      break;
  }
  return opts;
}

struct TrainConfig {
  Hyperparams hp;
  int eval_every = 1;   // epochs between validation evaluations
  int patience = 10;    // evaluations without improvement before stopping
  std::string checkpoint_dir;
  Ablation ablation = Ablation::full;

  void validate() const {
    hp.validate();
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
  }
};

struct StepLog {
  std::int64_t step;
  int epoch;
  LossBreakdown loss;
};

struct EvalPoint {
  int epoch;
  double val_ndcg20;
  bool best;
};

struct TrainReport {
  std::vector<LossBreakdown> epoch_losses;  // per-epoch means
  std::vector<EvalPoint> val_history;
  int best_epoch = 0;
  double best_val_ndcg20 = 0.0;
  int epochs_run = 0;
  std::string stop_reason;
};

struct FitResult {
  TrainReport report;
  EmbeddingState state;  // best checkpoint's parameters
  AdamState adam;        // moments at the best checkpoint
};

using StepLogFn = std::function<void(const StepLog&)>;

inline void checkpoint_save(const EmbeddingState& state, const AdamState& adam,
                            const std::string& path);

// Algorithm: epoch loop over shuffled batches with Adam updates, validation
// NDCG@20 every eval_every epochs, early stop after `patience` evaluations
// without improvement; returns the best evaluated checkpoint.
inline FitResult fit(const InteractionDataset& ds, const TrainConfig& config,
                     const StepLogFn& log_fn = nullptr) {
  config.validate();
  const Hyperparams& hp = config.hp;
  const TotalLossOptions opts = ablation_options(config.ablation);
  const NormalizedAdjacency adj = build_adjacency(ds);
  const PopularityIndex pop_index = build_popularity_index(ds);

  FitResult out;
  EmbeddingState state = init_embeddings(ds.num_users, ds.num_items, hp.dim, hp.seed);
  AdamState adam = AdamState::init(ds.num_users, ds.num_items, hp.dim);
  Rng rng(hp.seed);

  out.state = state;
  out.adam = adam;
  out.report.best_epoch = 0;
  out.report.best_val_ndcg20 = -1.0;
  int evals_since_best = 0;
  std::int64_t step = 0;
  out.report.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    EpochBatcher batcher(ds, static_cast<std::size_t>(hp.batch_size), rng);
    LossBreakdown mean;
    std::size_t batches = 0;
    while (auto batch = batcher.next()) {
      const LossBreakdown lb = train_step(state, adam, adj, *batch, pop_index, hp, rng, opts);
      ++step;
      ++batches;
      mean.rec += lb.rec;
      mean.sa += lb.sa;
      mean.cl_pop += lb.cl_pop;
      mean.cl_unpop += lb.cl_unpop;
      mean.cl_item += lb.cl_item;
      mean.cl_user += lb.cl_user;
      mean.cl_total += lb.cl_total;
      mean.reg += lb.reg;
      mean.total += lb.total;
      if (log_fn) log_fn({step, epoch, lb});
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      mean.rec *= inv;
      mean.sa *= inv;
      mean.cl_pop *= inv;
      mean.cl_unpop *= inv;
      mean.cl_item *= inv;
      mean.cl_user *= inv;
      mean.cl_total *= inv;
      mean.reg *= inv;
      mean.total *= inv;
    }
    out.report.epoch_losses.push_back(mean);
    out.report.epochs_run = epoch;

    if (epoch % config.eval_every == 0) {
      const int k_val = std::min(20, ds.num_items);  // tiny-catalog clamp
      const PropagatedEmbeddings prop = propagate(state, adj, hp.layers);
      const RankingResult ranking = rank_all(prop, ds, {k_val}, EvalTarget::validation);
      const OverallMetrics m = compute_metrics(ranking, ds, k_val, EvalTarget::validation);
      const bool improved = m.ndcg > out.report.best_val_ndcg20;
      out.report.val_history.push_back({epoch, m.ndcg, improved});
      if (improved) {
        out.report.best_val_ndcg20 = m.ndcg;
        out.report.best_epoch = epoch;
        out.state = state;
        out.adam = adam;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= config.patience) {
          out.report.stop_reason = "early_stopping";
          break;
        }
      }
    }
  }
  if (out.report.val_history.empty()) {
    // No evaluation ever ran (epochs < eval_every); keep the final state.
    out.state = state;
    out.adam = adam;
    out.report.best_epoch = out.report.epochs_run;
    out.report.best_val_ndcg20 = 0.0;
  }
  if (!config.checkpoint_dir.empty()) {
    checkpoint_save(out.state, out.adam, config.checkpoint_dir + "/checkpoint.ckpt");
  }
  return out;
}

namespace detail {

inline void write_block(std::ofstream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

inline void read_block(std::ifstream& in, Mat& m) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

}  // namespace detail

// Checkpoint layout: "PAAC-CKPT v1 M N D\n" then little-endian float64
// blocks (user, item parameters; first and second moments) followed by the
// per-row int64 step counters.
inline void checkpoint_save(const EmbeddingState& state, const AdamState& adam,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << "PAAC-CKPT v1 " << state.num_users() << ' ' << state.num_items() << ' ' << state.dim
      << '\n';
  detail::write_block(out, state.user_base);
  detail::write_block(out, state.item_base);
  detail::write_block(out, adam.m_user);
  detail::write_block(out, adam.m_item);
  detail::write_block(out, adam.v_user);
  detail::write_block(out, adam.v_item);
  out.write(reinterpret_cast<const char*>(adam.t_user.data()),
            static_cast<std::streamsize>(sizeof(std::int64_t) * adam.t_user.size()));
  out.write(reinterpret_cast<const char*>(adam.t_item.data()),
            static_cast<std::streamsize>(sizeof(std::int64_t) * adam.t_item.size()));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

inline void checkpoint_load(EmbeddingState& state, AdamState& adam, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::string magic, version;
  int m = 0, n = 0, d = 0;
  in >> magic >> version >> m >> n >> d;
  if (!in || magic != "PAAC-CKPT" || version != "v1") {
    throw FormatError("not a PAAC-CKPT v1 file: " + path);
  }
  if (m != state.num_users() || n != state.num_items() || d != state.dim) {
    throw FormatError("checkpoint dims (" + std::to_string(m) + "," + std::to_string(n) + "," +
                      std::to_string(d) + ") do not match the model");
  }
  in.ignore(1);  // newline after the header
  detail::read_block(in, state.user_base);
  detail::read_block(in, state.item_base);
  detail::read_block(in, adam.m_user);
  detail::read_block(in, adam.m_item);
  detail::read_block(in, adam.v_user);
  detail::read_block(in, adam.v_item);
  in.read(reinterpret_cast<char*>(adam.t_user.data()),
          static_cast<std::streamsize>(sizeof(std::int64_t) * adam.t_user.size()));
  in.read(reinterpret_cast<char*>(adam.t_item.data()),
          static_cast<std::streamsize>(sizeof(std::int64_t) * adam.t_item.size()));
  if (!in) throw FormatError("truncated checkpoint: " + path);
}

// Reads only the header of a checkpoint; used to size a model before load.
inline void checkpoint_dims(const std::string& path, int& m, int& n, int& d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version >> m >> n >> d;
  if (!in || magic != "PAAC-CKPT" || version != "v1") {
    throw FormatError("not a PAAC-CKPT v1 file: " + path);
  }
}

}  // namespace paac

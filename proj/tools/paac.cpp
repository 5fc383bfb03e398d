// paac: prepare / train / eval / sweep / stats driver for the PAAC
// recommender engine (LightGCN encoder + popularity-aware supervised
// alignment + re-weighted contrastive learning).

#include "paac/config.hpp"
#include "paac/dataset.hpp"
#include "paac/io.hpp"
#include "paac/losses.hpp"
#include "paac/metrics.hpp"
#include "paac/popularity.hpp"
#include "paac/sampler.hpp"
#include "paac/separation.hpp"
#include "paac/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using paac::RunConfig;

namespace {

struct CliState {
  RunConfig cfg;
  std::string config_path;
  std::string k_spec;  // empty = keep the config/default k list
  std::vector<std::string> grids;
};

void add_config_flags(CLI::App* cmd, CliState& st) {
  RunConfig& c = st.cfg;
  cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  // The file is loaded before CLI11 runs, so flags override config values.
  cmd->add_option("--config", st.config_path, "flat key = value config file");
  cmd->add_option("--input", c.input, "raw interaction file");
  cmd->add_option("--format", c.format, "input format: tsv or csv");
  cmd->add_option("--k_core", c.k_core, "k-core filter threshold");
  cmd->add_option("--test_fraction", c.test_fraction, "test split fraction");
  cmd->add_option("--val_fraction", c.val_fraction, "validation split fraction");
  cmd->add_option("--splits", c.splits, "prepared split manifest directory");
  cmd->add_option("--checkpoint", c.checkpoint, "checkpoint file to evaluate");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--lambda1", c.hp.lambda1, "supervised alignment weight");
  cmd->add_option("--lambda2", c.hp.lambda2, "contrastive loss weight");
  cmd->add_option("--lambda3", c.hp.lambda3, "L2 regularization coefficient");
  cmd->add_option("--gamma", c.hp.gamma, "popular-anchor weight in item contrast");
  cmd->add_option("--beta", c.hp.beta, "cross-group negative weight");
  cmd->add_option("--x_ratio", c.hp.x_ratio, "top x%% of batch items labeled popular");
  cmd->add_option("--tau", c.hp.tau, "InfoNCE temperature");
  cmd->add_option("--epsilon", c.hp.epsilon, "view perturbation magnitude");
  cmd->add_option("--layers", c.hp.layers, "propagation layers");
  cmd->add_option("--lr", c.hp.lr, "learning rate");
  cmd->add_option("--dim", c.hp.dim, "embedding dimension");
  cmd->add_option("--batch_size", c.hp.batch_size, "training batch size");
  cmd->add_option("--epochs", c.hp.epochs, "maximum training epochs");
  cmd->add_option("--seed", c.hp.seed, "random seed (PAAC_SEED overrides the default)");
  cmd->add_option("--eval_every", c.eval_every, "epochs between validation evaluations");
  cmd->add_option("--patience", c.patience, "evaluations without improvement before stopping");
  cmd->add_option("--ablation", c.ablation, "full, no-pop-cl, no-unpop-cl or no-alignment");
  cmd->add_option("--preset", c.preset, "named configuration preset (simgcl)");
  cmd->add_option("--log_every", c.log_every, "steps between loss log lines (0 disables)");
  cmd->add_option("--k", st.k_spec, "comma-separated ranking cutoffs");
  cmd->add_option("--pareto_pct", c.pareto_pct, "top %% of items labeled Popular in reports");
  cmd->add_option("--separation_sample", c.separation_sample,
                  "max rows per group for separation diagnostics (0 = all)");
  cmd->add_option("--eval_target", c.eval_target, "test or validation");
  cmd->add_flag("--export-embeddings", c.export_embeddings, "write PAAC-EMB files");
}

void finalize(CliState& st) {
  if (!st.k_spec.empty()) {
    st.cfg.k_list = paac::detail::parse_int_list(st.k_spec);
    if (st.cfg.k_list.empty()) throw paac::ConfigError("empty --k list");
  }
  st.cfg.apply_preset();
  st.cfg.validate();
}

int cmd_prepare(CliState& st) {
  finalize(st);
  const RunConfig& c = st.cfg;
  if (c.input.empty()) throw paac::ConfigError("prepare requires --input");
  const auto fmt = c.format == "csv" ? paac::InteractionFormat::csv : paac::InteractionFormat::tsv;
  auto raw = paac::load_interactions(c.input, fmt);
  raw = paac::k_core_filter(raw, c.k_core);
  const auto ds = paac::build_unbiased_split(raw, c.test_fraction, c.val_fraction, c.hp.seed);
  paac::save_split_manifest(ds, c.out);
  paac::write_resolved_config(c, c.out + "/resolved_config.txt");
  std::cout << paac::dataset_stats_json(ds).dump(2) << std::endl;
  return 0;
}

paac::StepLogFn make_step_logger(std::ofstream& log, int log_every) {
  if (log_every <= 0) return nullptr;
  return [&log, log_every](const paac::StepLog& s) {
    if (s.step % log_every == 0) log << paac::step_log_json(s).dump() << '\n';
  };
}

int cmd_train(CliState& st) {
  finalize(st);
  const RunConfig& c = st.cfg;
  if (c.splits.empty()) throw paac::ConfigError("train requires --splits");
  const auto ds = paac::load_split_manifest(c.splits);
  fs::create_directories(c.out);
  paac::write_resolved_config(c, c.out + "/resolved_config.txt");

  paac::TrainConfig tc = c.train_config();
  tc.checkpoint_dir = c.out;
  std::ofstream log(c.out + "/train_log.jsonl");
  if (!log) throw paac::IoError("cannot write " + c.out + "/train_log.jsonl");
  const paac::FitResult result = paac::fit(ds, tc, make_step_logger(log, c.log_every));
  for (const auto& p : result.report.val_history) {
    log << paac::json{{"epoch", p.epoch}, {"val_ndcg20", p.val_ndcg20}, {"best", p.best}}.dump()
        << '\n';
  }
  std::ofstream rep(c.out + "/train_report.json");
  rep << paac::train_report_json(result.report).dump(2) << '\n';
  if (c.export_embeddings) {
    const auto adj = paac::build_adjacency(ds);
    const auto prop = paac::propagate(result.state, adj, c.hp.layers);
    paac::export_embeddings_binary(prop, c.out + "/embeddings.emb");
    paac::export_embeddings_text(prop, c.out + "/embeddings.emb.txt");
  }
  std::cout << "best_epoch=" << result.report.best_epoch
            << " val_ndcg20=" << result.report.best_val_ndcg20
            << " stop=" << result.report.stop_reason << std::endl;
  return 0;
}

// Deterministically keep at most `cap` rows of a group (seeded subsample).
paac::Mat subsample_rows(const paac::Mat& src, const std::vector<int>& ids, int cap,
                         std::uint64_t seed) {
  std::vector<int> keep = ids;
  if (cap > 0 && static_cast<int>(keep.size()) > cap) {
    paac::Rng rng(seed);
    paac::fisher_yates_shuffle(keep, rng);
    keep.resize(cap);
    std::sort(keep.begin(), keep.end());
  }
  paac::Mat out(static_cast<Eigen::Index>(keep.size()), src.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = src.row(keep[r]);
  return out;
}

int cmd_eval(CliState& st) {
  finalize(st);
  const RunConfig& c = st.cfg;
  if (c.splits.empty() || c.checkpoint.empty()) {
    throw paac::ConfigError("eval requires --splits and --checkpoint");
  }
  const auto ds = paac::load_split_manifest(c.splits);
  int m = 0, n = 0, d = 0;
  paac::checkpoint_dims(c.checkpoint, m, n, d);
  if (m != ds.num_users || n != ds.num_items) {
    throw paac::FormatError("checkpoint does not match the split manifest dimensions");
  }
  paac::EmbeddingState state;
  state.dim = d;
  state.user_base = paac::Mat::Zero(m, d);
  state.item_base = paac::Mat::Zero(n, d);
  paac::AdamState adam = paac::AdamState::init(m, n, d);
  paac::checkpoint_load(state, adam, c.checkpoint);

  const auto adj = paac::build_adjacency(ds);
  const auto pop_index = paac::build_popularity_index(ds);
  const auto prop = paac::propagate(state, adj, c.hp.layers);
  const auto target = c.eval_target == "validation" ? paac::EvalTarget::validation
                                                    : paac::EvalTarget::test;
  const auto report =
      paac::build_metrics_report(prop, ds, pop_index, c.k_list, c.pareto_pct, target);

  fs::create_directories(c.out);
  paac::write_resolved_config(c, c.out + "/resolved_config.txt");
  std::ofstream mj(c.out + "/metrics.json");
  mj << paac::metrics_report_json(report).dump(2) << '\n';
  std::ofstream mc(c.out + "/metrics.csv");
  mc << paac::metrics_report_csv(report);

  const auto flags = paac::pareto_popular_flags(pop_index, c.pareto_pct);
  std::vector<int> pop_ids, unpop_ids;
  for (int i = 0; i < ds.num_items; ++i) (flags[i] ? pop_ids : unpop_ids).push_back(i);
  const paac::Mat ga = subsample_rows(prop.item_final, pop_ids, c.separation_sample, c.hp.seed);
  const paac::Mat gb =
      subsample_rows(prop.item_final, unpop_ids, c.separation_sample, c.hp.seed + 1);
  const auto sep = paac::separation_report(ga, gb);
  std::ofstream sj(c.out + "/separation.json");
  sj << paac::separation_report_json(sep).dump(2) << '\n';

  if (c.export_embeddings) {
    paac::export_embeddings_binary(prop, c.out + "/embeddings.emb");
    paac::export_embeddings_text(prop, c.out + "/embeddings.emb.txt");
  }
  std::cout << paac::metrics_report_json(report).dump(2) << std::endl;
  return 0;
}

int cmd_stats(CliState& st) {
  finalize(st);
  if (st.cfg.splits.empty()) throw paac::ConfigError("stats requires --splits");
  const auto ds = paac::load_split_manifest(st.cfg.splits);
  std::cout << paac::dataset_stats_json(ds).dump(2) << std::endl;
  return 0;
}

struct GridAxis {
  std::string key;
  std::vector<double> values;
};

GridAxis parse_grid(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw paac::ConfigError("grid spec must be key=v1,v2,...: " + spec);
  GridAxis axis;
  axis.key = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) axis.values.push_back(std::stod(tok));
  }
  if (axis.values.empty()) throw paac::ConfigError("grid axis has no values: " + spec);
  return axis;
}

void apply_grid_value(RunConfig& c, const std::string& key, double v) {
  if (key == "lambda1") c.hp.lambda1 = v;
  else if (key == "lambda2") c.hp.lambda2 = v;
  else if (key == "gamma") c.hp.gamma = v;
  else if (key == "beta") c.hp.beta = v;
  else if (key == "x_ratio") c.hp.x_ratio = v;
  else throw paac::ConfigError("unsupported grid key: " + key);
}

double ndcg_at_sort_k(const paac::json& metrics, int sort_k) {
  for (const auto& row : metrics.at("results")) {
    if (row.at("k").get<int>() == sort_k) return row.at("overall").at("ndcg").get<double>();
  }
  return -1.0;
}

int cmd_sweep(CliState& st) {
  finalize(st);
  const RunConfig& base = st.cfg;
  if (base.splits.empty()) throw paac::ConfigError("sweep requires --splits");
  if (st.grids.empty()) throw paac::ConfigError("sweep requires at least one --grid");
  std::vector<GridAxis> axes;
  for (const auto& g : st.grids) axes.push_back(parse_grid(g));

  const auto ds = paac::load_split_manifest(base.splits);
  fs::create_directories(base.out);
  paac::write_resolved_config(base, base.out + "/resolved_config.txt");
  const int sort_k = std::find(base.k_list.begin(), base.k_list.end(), 20) != base.k_list.end()
                         ? 20
                         : base.k_list.front();

  struct CellRow {
    std::string name;
    paac::json assignment;
    double ndcg = -1.0;
    std::string status;
  };
  std::vector<CellRow> rows;

  std::vector<std::size_t> cursor(axes.size(), 0);
  bool done = false;
  while (!done) {
    RunConfig cell = base;
    std::string name;
    paac::json assignment;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].values[cursor[a]];
      apply_grid_value(cell, axes[a].key, v);
      if (!name.empty()) name += "__";
      std::ostringstream val;
      val << v;
      name += axes[a].key + "=" + val.str();
      assignment[axes[a].key] = v;
    }
    const std::string cell_dir = base.out + "/cells/" + name;
    const std::string metrics_path = cell_dir + "/metrics.json";
    CellRow row{name, assignment, -1.0, "ok"};
    try {
      if (fs::exists(metrics_path)) {
        row.status = "cached";
      } else {
        fs::create_directories(cell_dir);
        cell.out = cell_dir;
        cell.validate();
        paac::TrainConfig tc = cell.train_config();
        tc.checkpoint_dir = cell_dir;
        std::ofstream log(cell_dir + "/train_log.jsonl");
        const paac::FitResult res = paac::fit(ds, tc, make_step_logger(log, cell.log_every));
        std::ofstream rep(cell_dir + "/train_report.json");
        rep << paac::train_report_json(res.report).dump(2) << '\n';
        const auto adj = paac::build_adjacency(ds);
        const auto pop_index = paac::build_popularity_index(ds);
        const auto prop = paac::propagate(res.state, adj, cell.hp.layers);
        const auto report = paac::build_metrics_report(prop, ds, pop_index, cell.k_list,
                                                       cell.pareto_pct, paac::EvalTarget::test);
        std::ofstream mj(metrics_path);
        mj << paac::metrics_report_json(report).dump(2) << '\n';
      }
      std::ifstream mi(metrics_path);
      row.ndcg = ndcg_at_sort_k(paac::json::parse(mi), sort_k);
    } catch (const std::exception& e) {
      row.status = "failed";
      std::ofstream err(cell_dir + "/error.txt");
      err << e.what() << '\n';
    }
    rows.push_back(std::move(row));

    for (std::size_t a = 0;; ++a) {  // odometer increment
      if (a == axes.size()) {
        done = true;
        break;
      }
      if (++cursor[a] < axes[a].values.size()) break;
      cursor[a] = 0;
    }
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const CellRow& a, const CellRow& b) { return a.ndcg > b.ndcg; });
  std::ofstream csv(base.out + "/sweep.csv");
  csv << std::setprecision(17) << "cell,ndcg@" << sort_k << ",status\n";
  for (const auto& r : rows) {
    csv << r.name << ',' << r.ndcg << ',' << r.status << '\n';
  }
  std::cout << "sweep finished: " << rows.size() << " cells, best ";
  if (!rows.empty()) std::cout << rows.front().name << " ndcg@" << sort_k << "=" << rows.front().ndcg;
  std::cout << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAAC recommender training and evaluation engine"};
  app.require_subcommand(1);
  CliState st;

  auto* prepare = app.add_subcommand("prepare", "filter raw interactions and build the splits");
  auto* train = app.add_subcommand("train", "train on a prepared split manifest");
  auto* eval = app.add_subcommand("eval", "rank, score and run diagnostics on a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "Cartesian hyperparameter sweep (train+eval per cell)");
  auto* stats = app.add_subcommand("stats", "print the statistics of a prepared split manifest");
  for (auto* cmd : {prepare, train, eval, sweep, stats}) add_config_flags(cmd, st);
  sweep->add_option("--grid", st.grids, "axis spec key=v1,v2,... (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  try {
    // Load --config first so explicit flags keep precedence over the file.
    for (int a = 1; a < argc; ++a) {
      const std::string arg = argv[a];
      if (arg == "--config" && a + 1 < argc) {
        paac::load_config_file(st.cfg, argv[a + 1]);
      } else if (arg.rfind("--config=", 0) == 0) {
        paac::load_config_file(st.cfg, arg.substr(9));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (prepare->parsed()) return cmd_prepare(st);
    if (train->parsed()) return cmd_train(st);
    if (eval->parsed()) return cmd_eval(st);
    if (sweep->parsed()) return cmd_sweep(st);
    if (stats->parsed()) return cmd_stats(st);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

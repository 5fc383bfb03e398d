#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"
#include "paac/graph.hpp"
#include "paac/losses.hpp"
#include "paac/metrics.hpp"
#include "paac/popularity.hpp"
#include "paac/separation.hpp"
#include "paac/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace paac {

using json = nlohmann::json;

inline json dataset_stats_json(const InteractionDataset& ds) {
  std::vector<std::int64_t> full_counts(ds.num_items, 0);
  for (const auto& [u, i] : ds.train) ++full_counts[i];
  for (const auto& [u, i] : ds.validation) ++full_counts[i];
  for (const auto& [u, i] : ds.test) ++full_counts[i];
  const std::int64_t total = static_cast<std::int64_t>(ds.train.size() + ds.validation.size() +
                                                       ds.test.size());
  json j;
  j["M"] = ds.num_users;
  j["N"] = ds.num_items;
  j["train"] = ds.train.size();
  j["valid"] = ds.validation.size();
  j["test"] = ds.test.size();
  j["c"] = ds.test_quota;
  j["gini"] = gini_from_counts(full_counts);
  j["gini_train"] = gini_from_counts(ds.train_item_counts());
  j["max"] = *std::max_element(full_counts.begin(), full_counts.end());
  j["min"] = *std::min_element(full_counts.begin(), full_counts.end());
  j["mean"] = static_cast<double>(total) / static_cast<double>(ds.num_items);
  return j;
}

// Manifest layout under dir: train.txt / valid.txt / test.txt of
// "user_index item_index" lines, stats.json, and id->key maps.
inline void save_split_manifest(const InteractionDataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_pair_file(dir + "/train.txt", ds.train);
  write_pair_file(dir + "/valid.txt", ds.validation);
  write_pair_file(dir + "/test.txt", ds.test);
  write_key_file(dir + "/id_users.txt", ds.user_keys);
  write_key_file(dir + "/id_items.txt", ds.item_keys);
  std::ofstream out(dir + "/stats.json");
  if (!out) throw IoError("cannot write " + dir + "/stats.json");
  out << dataset_stats_json(ds).dump(2) << '\n';
}

inline InteractionDataset load_split_manifest(const std::string& dir) {
  std::ifstream stats_in(dir + "/stats.json");
  if (!stats_in) throw IoError("cannot read " + dir + "/stats.json");
  json stats = json::parse(stats_in);
  InteractionDataset ds;
  ds.num_users = stats.at("M").get<int>();
  ds.num_items = stats.at("N").get<int>();
  ds.test_quota = stats.value("c", 0);
  ds.train = read_pair_file(dir + "/train.txt");
  ds.validation = read_pair_file(dir + "/valid.txt");
  ds.test = read_pair_file(dir + "/test.txt");
  auto read_keys = [](const std::string& path, int expected) {
    std::vector<std::string> keys;
    std::ifstream in(path);
    std::string line;
    while (in && std::getline(in, line)) keys.push_back(line);
    if (static_cast<int>(keys.size()) != expected) {
      keys.clear();
      for (int k = 0; k < expected; ++k) keys.push_back(std::to_string(k));
    }
    return keys;
  };
  ds.user_keys = read_keys(dir + "/id_users.txt", ds.num_users);
  ds.item_keys = read_keys(dir + "/id_items.txt", ds.num_items);
  for (const auto& pairs : {&ds.train, &ds.validation, &ds.test}) {
    for (const auto& [u, i] : *pairs) {
      if (u < 0 || u >= ds.num_users || i < 0 || i >= ds.num_items) {
        throw FormatError("split manifest index out of range in " + dir);
      }
    }
  }
  ds.finalize();
  return ds;
}

// --- embedding export -------------------------------------------------------

// Binary: "PAAC-EMB v1 M N D\n" then little-endian float32, row-major,
// users then items.
inline void export_embeddings_binary(const PropagatedEmbeddings& prop, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings: " + path);
  const int m = static_cast<int>(prop.user_final.rows());
  const int n = static_cast<int>(prop.item_final.rows());
  const int d = static_cast<int>(prop.user_final.cols());
  out << "PAAC-EMB v1 " << m << ' ' << n << ' ' << d << '\n';
  auto write_rows = [&](const Mat& mat) {
    std::vector<float> row(d);
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (int c = 0; c < d; ++c) row[c] = static_cast<float>(mat(r, c));
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(float) * row.size()));
    }
  };
  write_rows(prop.user_final);
  write_rows(prop.item_final);
  if (!out) throw IoError("short write on embeddings: " + path);
}

// Text variant for diagnostics: same header, one row per line.
inline void export_embeddings_text(const PropagatedEmbeddings& prop, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings: " + path);
  const int m = static_cast<int>(prop.user_final.rows());
  const int n = static_cast<int>(prop.item_final.rows());
  const int d = static_cast<int>(prop.user_final.cols());
  out << "PAAC-EMB v1 " << m << ' ' << n << ' ' << d << '\n';
  out << std::setprecision(9);
  auto write_rows = [&](const Mat& mat) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (int c = 0; c < d; ++c) {
        if (c) out << ' ';
        out << static_cast<float>(mat(r, c));
      }
      out << '\n';
    }
  };
  write_rows(prop.user_final);
  write_rows(prop.item_final);
}

// --- reports ----------------------------------------------------------------

struct MetricsReport {
  struct PerK {
    int k = 0;
    OverallMetrics overall;
    GroupMetrics groups;
  };
  std::vector<PerK> per_k;
  std::string target = "test";
  double pareto_pct = 20.0;
};

inline MetricsReport build_metrics_report(const PropagatedEmbeddings& prop,
                                          const InteractionDataset& ds,
                                          const PopularityIndex& pop_index,
                                          const std::vector<int>& k_values, double pareto_pct,
                                          EvalTarget target = EvalTarget::test) {
  MetricsReport rep;
  rep.target = target == EvalTarget::test ? "test" : "validation";
  rep.pareto_pct = pareto_pct;
  const RankingResult ranking = rank_all(prop, ds, k_values, target);
  for (int k : k_values) {
    MetricsReport::PerK row;
    row.k = k;
    row.overall = compute_metrics(ranking, ds, k, target);
    row.groups = group_metrics(ranking, ds, pop_index, k, pareto_pct, target);
    rep.per_k.push_back(row);
  }
  return rep;
}

inline json overall_metrics_json(const OverallMetrics& m) {
  return json{{"recall", m.recall}, {"hr", m.hr}, {"ndcg", m.ndcg}, {"users", m.num_users}};
}

inline json metrics_report_json(const MetricsReport& rep) {
  json out;
  out["target"] = rep.target;
  out["pareto_pct"] = rep.pareto_pct;
  out["results"] = json::array();
  for (const auto& row : rep.per_k) {
    json r;
    r["k"] = row.k;
    r["overall"] = overall_metrics_json(row.overall);
    r["popular"] = row.groups.popular ? overall_metrics_json(*row.groups.popular) : json(nullptr);
    r["unpopular"] =
        row.groups.unpopular ? overall_metrics_json(*row.groups.unpopular) : json(nullptr);
    if (row.groups.delta_ndcg) {
      r["delta"] = json{{"recall", *row.groups.delta_recall},
                        {"hr", *row.groups.delta_hr},
                        {"ndcg", *row.groups.delta_ndcg}};
    } else {
      r["delta"] = nullptr;
    }
    out["results"].push_back(r);
  }
  return out;
}

inline std::string metrics_report_csv(const MetricsReport& rep) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "k,group,recall,hr,ndcg,users\n";
  auto emit = [&](int k, const char* group, const OverallMetrics& m) {
    out << k << ',' << group << ',' << m.recall << ',' << m.hr << ',' << m.ndcg << ','
        << m.num_users << '\n';
  };
  for (const auto& row : rep.per_k) {
    emit(row.k, "overall", row.overall);
    if (row.groups.popular) emit(row.k, "popular", *row.groups.popular);
    if (row.groups.unpopular) emit(row.k, "unpopular", *row.groups.unpopular);
    if (row.groups.delta_ndcg) {
      out << row.k << ",delta," << *row.groups.delta_recall << ',' << *row.groups.delta_hr << ','
          << *row.groups.delta_ndcg << ",\n";
    }
  }
  return out.str();
}

inline json separation_report_json(const SeparationReport& rep) {
  return json{{"mmd", rep.mmd_value},
              {"bandwidth", rep.bandwidth},
              {"mmd_degenerate", rep.mmd_degenerate},
              {"cross_cosine", rep.cross_cosine_value},
              {"centroid_cosine", rep.centroid_cosine_value}};
}

// One JSON object per logged step.
inline json step_log_json(const StepLog& s) {
  return json{{"step", s.step},       {"epoch", s.epoch},
              {"rec", s.loss.rec},    {"sa", s.loss.sa},
              {"cl_pop", s.loss.cl_pop}, {"cl_unpop", s.loss.cl_unpop},
              {"cl_user", s.loss.cl_user}, {"reg", s.loss.reg},
              {"total", s.loss.total}};
}

inline json train_report_json(const TrainReport& rep) {
  json out;
  out["best_epoch"] = rep.best_epoch;
  out["best_val_ndcg20"] = rep.best_val_ndcg20;
  out["epochs_run"] = rep.epochs_run;
  out["stop_reason"] = rep.stop_reason;
  out["val_history"] = json::array();
  for (const auto& p : rep.val_history) {
    out["val_history"].push_back(
        json{{"epoch", p.epoch}, {"val_ndcg20", p.val_ndcg20}, {"best", p.best}});
  }
  out["epoch_losses"] = json::array();
  for (std::size_t e = 0; e < rep.epoch_losses.size(); ++e) {
    const auto& lb = rep.epoch_losses[e];
    out["epoch_losses"].push_back(json{{"epoch", e + 1},
                                       {"rec", lb.rec},
                                       {"sa", lb.sa},
                                       {"cl_pop", lb.cl_pop},
                                       {"cl_unpop", lb.cl_unpop},
                                       {"cl_user", lb.cl_user},
                                       {"reg", lb.reg},
                                       {"total", lb.total}});
  }
  return out;
}

}  // namespace paac

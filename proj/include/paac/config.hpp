#pragma once

#include "paac/common.hpp"
#include "paac/losses.hpp"
#include "paac/trainer.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace paac {

// Everything a run needs, flat; every field maps 1:1 to a CLI flag and a
// "key = value" config line. PAAC_SEED, when set, replaces the built-in
// default seed (config file and flags still override it).
struct RunConfig {
  // data preparation
  std::string input;
  std::string format = "tsv";
  int k_core = 10;
  double test_fraction = 0.10;
  double val_fraction = 0.10;
  // locations
  std::string splits;
  std::string checkpoint;
  std::string out = "paac_out";
  // model + optimization
  Hyperparams hp;
  // trainer
  int eval_every = 1;
  int patience = 10;
  std::string ablation = "full";
  std::string preset;
  int log_every = 1;
  // evaluation
  std::vector<int> k_list = {20};
  double pareto_pct = 20.0;
  int separation_sample = 2000;
  std::string eval_target = "test";
  bool export_embeddings = false;

  RunConfig() {
    if (const char* env = std::getenv("PAAC_SEED")) {
      hp.seed = std::strtoull(env, nullptr, 10);
    }
  }

  Ablation ablation_mode() const {
    if (ablation == "full") return Ablation::full;
    if (ablation == "no-pop-cl") return Ablation::no_pop_cl;
    if (ablation == "no-unpop-cl") return Ablation::no_unpop_cl;
    if (ablation == "no-alignment") return Ablation::no_alignment;
    throw ConfigError("unknown ablation: " + ablation);
  }

  // Presets map to known configurations; simgcl is the lambda1 = 0,
  // gamma = 0.5, beta = 1 objective.
  void apply_preset() {
    if (preset.empty()) return;
    if (preset == "simgcl") {
      hp.lambda1 = 0.0;
      hp.gamma = 0.5;
      hp.beta = 1.0;
      return;
    }
    throw ConfigError("unknown preset: " + preset);
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.hp = hp;
    tc.eval_every = eval_every;
    tc.patience = patience;
    tc.ablation = ablation_mode();
    return tc;
  }

  void validate() const {
    hp.validate();
    ablation_mode();
    if (eval_every < 1 || patience < 1 || log_every < 0) {
      throw ConfigError("eval_every/patience must be >= 1, log_every >= 0");
    }
    if (k_list.empty()) throw ConfigError("k list must be nonempty");
    for (int k : k_list) {
      if (k < 1) throw ConfigError("k values must be >= 1");
    }
    if (pareto_pct <= 0 || pareto_pct >= 100) throw ConfigError("pareto_pct must be in (0,100)");
    if (eval_target != "test" && eval_target != "validation") {
      throw ConfigError("eval_target must be test or validation");
    }
    if (format != "tsv" && format != "csv") throw ConfigError("format must be tsv or csv");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline std::vector<int> parse_int_list(const std::string& spec) {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!trim(tok).empty()) out.push_back(std::stoi(trim(tok)));
  }
  return out;
}

}  // namespace detail

// Applies one "key = value" assignment; unknown keys are rejected.
inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "input") c.input = value;
    else if (key == "format") c.format = value;
    else if (key == "k_core") c.k_core = std::stoi(value);
    else if (key == "test_fraction") c.test_fraction = std::stod(value);
    else if (key == "val_fraction") c.val_fraction = std::stod(value);
    else if (key == "splits") c.splits = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "out") c.out = value;
    else if (key == "lambda1") c.hp.lambda1 = std::stod(value);
    else if (key == "lambda2") c.hp.lambda2 = std::stod(value);
    else if (key == "lambda3") c.hp.lambda3 = std::stod(value);
    else if (key == "gamma") c.hp.gamma = std::stod(value);
    else if (key == "beta") c.hp.beta = std::stod(value);
    else if (key == "x_ratio") c.hp.x_ratio = std::stod(value);
    else if (key == "tau") c.hp.tau = std::stod(value);
    else if (key == "epsilon") c.hp.epsilon = std::stod(value);
    else if (key == "layers") c.hp.layers = std::stoi(value);
    else if (key == "lr") c.hp.lr = std::stod(value);
    else if (key == "dim") c.hp.dim = std::stoi(value);
    else if (key == "batch_size") c.hp.batch_size = std::stoi(value);
    else if (key == "epochs") c.hp.epochs = std::stoi(value);
    else if (key == "seed") c.hp.seed = std::stoull(value);
    else if (key == "eval_every") c.eval_every = std::stoi(value);
    else if (key == "patience") c.patience = std::stoi(value);
    else if (key == "ablation") c.ablation = value;
    else if (key == "preset") c.preset = value;
    else if (key == "log_every") c.log_every = std::stoi(value);
    else if (key == "k") c.k_list = detail::parse_int_list(value);
    else if (key == "pareto_pct") c.pareto_pct = std::stod(value);
    else if (key == "separation_sample") c.separation_sample = std::stoi(value);
    else if (key == "eval_target") c.eval_target = value;
    else if (key == "export_embeddings") c.export_embeddings = value == "true" || value == "1";
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value for config key " + key + ": " + value);
  } catch (const std::out_of_range&) {
    throw ConfigError("bad value for config key " + key + ": " + value);
  }
}

// Flat "key = value" file; blank lines and '#' comments are skipped.
inline void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + " line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
}

// The resolved snapshot a run writes next to its outputs; parseable by
// --config for exact reproduction.
inline std::string resolved_config_text(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "input = " << c.input << '\n';
  out << "format = " << c.format << '\n';
  out << "k_core = " << c.k_core << '\n';
  out << "test_fraction = " << c.test_fraction << '\n';
  out << "val_fraction = " << c.val_fraction << '\n';
  out << "splits = " << c.splits << '\n';
  out << "checkpoint = " << c.checkpoint << '\n';
  out << "out = " << c.out << '\n';
  out << "lambda1 = " << c.hp.lambda1 << '\n';
  out << "lambda2 = " << c.hp.lambda2 << '\n';
  out << "lambda3 = " << c.hp.lambda3 << '\n';
  out << "gamma = " << c.hp.gamma << '\n';
  out << "beta = " << c.hp.beta << '\n';
  out << "x_ratio = " << c.hp.x_ratio << '\n';
  out << "tau = " << c.hp.tau << '\n';
  out << "epsilon = " << c.hp.epsilon << '\n';
  out << "layers = " << c.hp.layers << '\n';
  out << "lr = " << c.hp.lr << '\n';
  out << "dim = " << c.hp.dim << '\n';
  out << "batch_size = " << c.hp.batch_size << '\n';
  out << "epochs = " << c.hp.epochs << '\n';
  out << "seed = " << c.hp.seed << '\n';
  out << "eval_every = " << c.eval_every << '\n';
  out << "patience = " << c.patience << '\n';
  out << "ablation = " << c.ablation << '\n';
  out << "preset = " << c.preset << '\n';
  out << "log_every = " << c.log_every << '\n';
  out << "k = ";
  for (std::size_t i = 0; i < c.k_list.size(); ++i) {
    if (i) out << ',';
    out << c.k_list[i];
  }
  out << '\n';
  out << "pareto_pct = " << c.pareto_pct << '\n';
  out << "separation_sample = " << c.separation_sample << '\n';
  out << "eval_target = " << c.eval_target << '\n';
  out << "export_embeddings = " << (c.export_embeddings ? "true" : "false") << '\n';
  return out.str();
}

inline void write_resolved_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << resolved_config_text(c);
}

}  // namespace paac

#include "paac/config.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>

using namespace paac;

TEST_CASE("defaults match the documented settings") {
  const RunConfig c;
  CHECK(c.hp.lr == 0.001);
  CHECK(c.hp.lambda3 == 1e-4);
  CHECK(c.hp.batch_size == 2048);
  CHECK(c.hp.dim == 64);
  CHECK(c.hp.x_ratio == 50.0);
  CHECK(c.hp.tau == 0.2);
  CHECK(c.hp.epsilon == 0.1);
  CHECK(c.k_list == std::vector<int>{20});
  CHECK(c.pareto_pct == 20.0);
  CHECK(c.k_core == 10);
  CHECK(c.test_fraction == 0.10);
  CHECK(c.val_fraction == 0.10);
}

TEST_CASE("the simgcl preset pins lambda1, gamma and beta") {
  RunConfig c;
  c.preset = "simgcl";
  c.apply_preset();
  CHECK(c.hp.lambda1 == 0.0);
  CHECK(c.hp.gamma == 0.5);
  CHECK(c.hp.beta == 1.0);

  RunConfig bad;
  bad.preset = "nope";
  CHECK_THROWS_AS(bad.apply_preset(), ConfigError);
}

TEST_CASE("ablation strings map to the trainer enum") {
  RunConfig c;
  CHECK(c.ablation_mode() == Ablation::full);
  c.ablation = "no-pop-cl";
  CHECK(c.ablation_mode() == Ablation::no_pop_cl);
  c.ablation = "no-unpop-cl";
  CHECK(c.ablation_mode() == Ablation::no_unpop_cl);
  c.ablation = "no-alignment";
  CHECK(c.ablation_mode() == Ablation::no_alignment);
  c.ablation = "garbage";
  CHECK_THROWS_AS(c.ablation_mode(), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
  RunConfig c;
  c.hp.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.hp.gamma = 0.5;
  c.hp.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.hp.tau = 0.2;
  c.eval_target = "train";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.eval_target = "test";
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("PAAC_SEED overrides the default seed only") {
  setenv("PAAC_SEED", "4242", 1);
  const RunConfig c;
  unsetenv("PAAC_SEED");
  CHECK(c.hp.seed == 4242);
  const RunConfig d;
  CHECK(d.hp.seed == 42);
}

TEST_CASE("the resolved snapshot lists every field once") {
  RunConfig c;
  c.hp.lambda1 = 12.5;
  c.k_list = {20, 50};
  const std::string text = resolved_config_text(c);
  CHECK(text.find("lambda1 = 12.5\n") != std::string::npos);
  CHECK(text.find("k = 20,50\n") != std::string::npos);
  CHECK(text.find("seed = 42\n") != std::string::npos);
  for (const char* key : {"input", "format", "k_core", "test_fraction", "val_fraction", "splits",
                          "checkpoint", "out", "lambda2", "lambda3", "gamma", "beta", "x_ratio",
                          "tau", "epsilon", "layers", "lr", "dim", "batch_size", "epochs",
                          "eval_every", "patience", "ablation", "preset", "log_every",
                          "pareto_pct", "separation_sample", "eval_target", "export_embeddings"}) {
    CHECK(text.find(std::string(key) + " = ") != std::string::npos);
  }
}

// Central finite-difference checks for every loss gradient, each loss in
// isolation and the multi-task total.

#include "paac/losses.hpp"

#include "support/builders.hpp"
#include "support/oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace paac;
using paac::testing::chain_to_base;
using paac::testing::gradcheck_ratio;

namespace {

struct Instance {
  InteractionDataset ds;
  NormalizedAdjacency adj;
  PopularityIndex pi;
  EmbeddingState st;
  MiniBatch batch;
  int layers;

  Instance(std::uint64_t seed, int layers_in)
      : ds(paac::testing::random_dataset(8, 8, seed)),
        adj(build_adjacency(ds)),
        pi(build_popularity_index(ds)),
        st(init_embeddings(8, 8, 4, seed + 100)),
        batch(paac::testing::sample_one_batch(ds, 10, seed + 200)),
        layers(layers_in) {}
};

GradientSet zero_grad(const EmbeddingState& st) {
  GradientSet g;
  g.d_user_base = Mat::Zero(st.user_base.rows(), st.dim);
  g.d_item_base = Mat::Zero(st.item_base.rows(), st.dim);
  return g;
}

}  // namespace

TEST_CASE("bpr gradient matches finite differences") {
  Instance in(3, 1);
  auto f = [&](const EmbeddingState& s) { return bpr_loss(in.batch, propagate(s, in.adj, in.layers)); };
  const auto prop = propagate(in.st, in.adj, in.layers);
  Mat grad_final = Mat::Zero(16, 4);
  bpr_loss(in.batch, prop, &grad_final);
  CHECK(gradcheck_ratio(f, in.st, chain_to_base(in.adj, in.layers, grad_final)) <= 1.0);
}

TEST_CASE("alignment gradient matches finite differences") {
  Instance in(5, 1);
  auto f = [&](const EmbeddingState& s) {
    return supervised_alignment_loss(in.batch, propagate(s, in.adj, in.layers), in.pi, 50.0);
  };
  const auto prop = propagate(in.st, in.adj, in.layers);
  Mat grad_final = Mat::Zero(16, 4);
  supervised_alignment_loss(in.batch, prop, in.pi, 50.0, &grad_final);
  CHECK(gradcheck_ratio(f, in.st, chain_to_base(in.adj, in.layers, grad_final)) <= 1.0);
}

namespace {

// cl_pop is gamma = 1, cl_unpop is gamma = 0; picks the value side to match.
double item_cl_value(const Instance& in, const EmbeddingState& s, const Hyperparams& hp,
                     std::uint64_t noise_seed, bool pop_side) {
  const auto prop = propagate(s, in.adj, in.layers);
  Rng rng(noise_seed);
  const auto views = make_batch_views(prop, hp.epsilon, rng, in.batch.batch_users,
                                      in.batch.batch_items);
  const auto res = cl_item_loss(in.batch, views, in.pi, hp);
  return pop_side ? res.cl_pop : res.cl_unpop;
}

GradientSet item_cl_grad(const Instance& in, const Hyperparams& hp, std::uint64_t noise_seed) {
  const auto prop = propagate(in.st, in.adj, in.layers);
  Rng rng(noise_seed);
  const auto views = make_batch_views(prop, hp.epsilon, rng, in.batch.batch_users,
                                      in.batch.batch_items);
  Mat d1 = Mat::Zero(views.items_v1.rows(), 4);
  Mat d2 = Mat::Zero(views.items_v2.rows(), 4);
  cl_item_loss(in.batch, views, in.pi, hp, &d1, &d2);
  Mat grad_final = Mat::Zero(16, 4);
  const Mat du = Mat::Zero(views.users_v1.rows(), 4);
  fold_view_gradients(views, du, du, d1, d2, 8, grad_final);
  return chain_to_base(in.adj, in.layers, grad_final);
}

}  // namespace

TEST_CASE("cl_pop and cl_unpop gradients match finite differences") {
  Instance in(7, 1);
  for (const bool pop_side : {true, false}) {
    Hyperparams hp;
    hp.gamma = pop_side ? 1.0 : 0.0;  // isolate one group term
    hp.beta = 0.6;
    hp.tau = 0.3;
    hp.epsilon = 0.1;
    auto f = [&](const EmbeddingState& s) { return item_cl_value(in, s, hp, 42, pop_side); };
    CHECK(gradcheck_ratio(f, in.st, item_cl_grad(in, hp, 42)) <= 1.0);
  }
}

TEST_CASE("cl_user gradient matches finite differences") {
  Instance in(11, 1);
  const double tau = 0.25, eps = 0.1;
  auto f = [&](const EmbeddingState& s) {
    const auto prop = propagate(s, in.adj, in.layers);
    Rng rng(17);
    const auto views = make_batch_views(prop, eps, rng, in.batch.batch_users, in.batch.batch_items);
    return cl_user_loss(in.batch, views, tau);
  };
  const auto prop = propagate(in.st, in.adj, in.layers);
  Rng rng(17);
  const auto views = make_batch_views(prop, eps, rng, in.batch.batch_users, in.batch.batch_items);
  Mat d1 = Mat::Zero(views.users_v1.rows(), 4);
  Mat d2 = Mat::Zero(views.users_v2.rows(), 4);
  cl_user_loss(in.batch, views, tau, &d1, &d2);
  Mat grad_final = Mat::Zero(16, 4);
  const Mat di = Mat::Zero(views.items_v1.rows(), 4);
  fold_view_gradients(views, d1, d2, di, di, 8, grad_final);
  CHECK(gradcheck_ratio(f, in.st, chain_to_base(in.adj, in.layers, grad_final)) <= 1.0);
}

TEST_CASE("l2 gradient is 2 lambda3 theta on touched rows") {
  Instance in(13, 0);
  auto f = [&](const EmbeddingState& s) { return l2_reg(s, in.batch, 1e-3); };
  GradientSet g = zero_grad(in.st);
  l2_reg(in.st, in.batch, 1e-3, &g);
  CHECK(gradcheck_ratio(f, in.st, g) <= 1.0);
}

TEST_CASE("total gradient matches finite differences across layer counts") {
  for (const int layers : {0, 1, 2}) {
    Instance in(17 + layers, layers);
    Hyperparams hp;
    hp.lambda1 = 0.8;
    hp.lambda2 = 0.5;
    hp.lambda3 = 1e-3;
    hp.gamma = 0.4;
    hp.beta = 0.7;
    hp.tau = 0.3;
    hp.epsilon = 0.1;
    hp.layers = layers;
    hp.dim = 4;
    auto f = [&](const EmbeddingState& s) {
      Rng rng(99);
      return total_loss(in.batch, s, in.adj, in.pi, hp, rng).first.total;
    };
    Rng rng(99);
    const auto [lb, grad] = total_loss(in.batch, in.st, in.adj, in.pi, hp, rng);
    CHECK(gradcheck_ratio(f, in.st, grad) <= 1.0);
  }
}

#include "paac/embedding.hpp"
#include "paac/views.hpp"

#include "support/builders.hpp"

#include <catch_amalgamated.hpp>

using namespace paac;
using Catch::Matchers::WithinAbs;

TEST_CASE("xavier init stays inside the fan bound and is seed-deterministic") {
  const auto st = init_embeddings(20, 30, 64, 4);
  const double bound = std::sqrt(6.0 / 128.0);
  CHECK_THAT(bound, WithinAbs(0.2165, 5e-5));
  CHECK(st.user_base.cwiseAbs().maxCoeff() <= bound);
  CHECK(st.item_base.cwiseAbs().maxCoeff() <= bound);

  const auto again = init_embeddings(20, 30, 64, 4);
  CHECK(st.user_base == again.user_base);
  CHECK(st.item_base == again.item_base);

  const auto other = init_embeddings(20, 30, 64, 5);
  CHECK(st.user_base != other.user_base);
}

static PropagatedEmbeddings toy_prop(int users, int items, int dim, std::uint64_t seed) {
  const auto st = init_embeddings(users, items, dim, seed);
  PropagatedEmbeddings prop;
  prop.user_final = st.user_base;
  prop.item_final = st.item_base;
  return prop;
}

TEST_CASE("epsilon zero gives row-normalized embeddings in both views") {
  const auto prop = toy_prop(4, 5, 6, 11);
  Rng rng(2);
  const auto v = make_views(prop, 0.0, rng);
  for (int r = 0; r < 5; ++r) {
    const Vec want = prop.item_final.row(r).normalized();
    CHECK((v.items_v1.row(r).transpose() - want).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((v.items_v2.row(r).transpose() - want).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("view rows are unit norm and views differ when epsilon > 0") {
  const auto prop = toy_prop(6, 7, 5, 3);
  Rng rng(8);
  const auto v = make_views(prop, 0.1, rng);
  for (const Mat* m : {&v.users_v1, &v.users_v2, &v.items_v1, &v.items_v2}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      CHECK_THAT(m->row(r).norm(), WithinAbs(1.0, 1e-12));
    }
  }
  CHECK(v.items_v1 != v.items_v2);
  CHECK(v.users_v1 != v.users_v2);
}

TEST_CASE("perturbation preserves the orthant of each row") {
  auto prop = toy_prop(3, 4, 6, 21);
  prop.item_final(0, 0) = 0.0;  // exercise the zero-component case
  Rng rng(5);
  const auto v = make_views(prop, 0.2, rng);
  for (Eigen::Index r = 0; r < prop.item_final.rows(); ++r) {
    for (Eigen::Index c = 0; c < prop.item_final.cols(); ++c) {
      const double e = prop.item_final(r, c);
      if (e > 0.0) {
        CHECK(v.items_v1(r, c) > 0.0);
      } else if (e < 0.0) {
        CHECK(v.items_v1(r, c) < 0.0);
      } else {
        CHECK(v.items_v1(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("batch views agree with the per-row kernel and map ids") {
  const auto prop = toy_prop(5, 6, 4, 17);
  Rng rng(9);
  const std::vector<int> users{1, 3};
  const std::vector<int> items{0, 2, 5};
  const auto bv = make_batch_views(prop, 0.1, rng, users, items);
  CHECK(bv.user_local(3) == 1);
  CHECK(bv.item_local(5) == 2);
  for (Eigen::Index r = 0; r < 2; ++r) CHECK_THAT(bv.users_v1.row(r).norm(), WithinAbs(1.0, 1e-12));
  for (Eigen::Index r = 0; r < 3; ++r) CHECK_THAT(bv.items_v2.row(r).norm(), WithinAbs(1.0, 1e-12));

  // Same rng stream and rows => identical draws as a fresh make_batch_views.
  Rng rng2(9);
  const auto bv2 = make_batch_views(prop, 0.1, rng2, users, items);
  CHECK(bv.items_v1 == bv2.items_v1);
  CHECK(bv.users_v2 == bv2.users_v2);
}

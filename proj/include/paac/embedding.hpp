#pragma once

#include "paac/common.hpp"

#include <cmath>

namespace paac {

// Layer-0 user and item embedding tables.
struct EmbeddingState {
  Mat user_base;  // M x D
  Mat item_base;  // N x D
  int dim = 0;

  int num_users() const { return static_cast<int>(user_base.rows()); }
  int num_items() const { return static_cast<int>(item_base.rows()); }
};

inline double xavier_uniform_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Xavier-uniform init with fan_in = fan_out = D; deterministic per seed.
inline EmbeddingState init_embeddings(int num_users, int num_items, int dim, std::uint64_t seed) {
  if (num_users < 1 || num_items < 1 || dim < 1) {
    throw std::invalid_argument("init_embeddings: M, N, D must be >= 1");
  }
  EmbeddingState st;
  st.dim = dim;
  st.user_base.resize(num_users, dim);
  st.item_base.resize(num_items, dim);
  const double bound = xavier_uniform_bound(dim, dim);
  Rng rng(seed);
  auto fill = [&](Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
      }
    }
  };
  fill(st.user_base);
  fill(st.item_base);
  return st;
}

}  // namespace paac

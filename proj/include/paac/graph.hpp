#pragma once

#include "paac/common.hpp"
#include "paac/dataset.hpp"
#include "paac/embedding.hpp"

#include <cmath>
#include <vector>

namespace paac {

// Symmetric-normalized bipartite adjacency over M+N nodes in CSR form.
// Users occupy rows [0, M), items rows [M, M+N); each train edge (u, i)
// carries weight 1/sqrt(deg(u) deg(i)) in both directions.
struct NormalizedAdjacency {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;
  std::vector<std::int64_t> user_degree;
  std::vector<std::int64_t> item_degree;

  int num_nodes() const { return num_users + num_items; }
};

inline NormalizedAdjacency build_adjacency(const InteractionDataset& ds) {
  if (ds.train.empty()) {
    throw std::invalid_argument("build_adjacency: empty train split");
  }
  NormalizedAdjacency adj;
  adj.num_users = ds.num_users;
  adj.num_items = ds.num_items;
  adj.user_degree.assign(ds.num_users, 0);
  adj.item_degree.assign(ds.num_items, 0);
  for (const auto& [u, i] : ds.train) {
    ++adj.user_degree[u];
    ++adj.item_degree[i];
  }
  const int nodes = adj.num_nodes();
  std::vector<std::size_t> counts(nodes, 0);
  for (const auto& [u, i] : ds.train) {
    ++counts[u];
    ++counts[ds.num_users + i];
  }
  adj.row_ptr.assign(nodes + 1, 0);
  for (int r = 0; r < nodes; ++r) {
    adj.row_ptr[r + 1] = adj.row_ptr[r] + counts[r];
  }
  adj.col_idx.resize(adj.row_ptr.back());
  adj.values.resize(adj.row_ptr.back());
  std::vector<std::size_t> fill(adj.row_ptr.begin(), adj.row_ptr.end() - 1);
  for (const auto& [u, i] : ds.train) {
    const double w = 1.0 / std::sqrt(static_cast<double>(adj.user_degree[u]) *
                                     static_cast<double>(adj.item_degree[i]));
    adj.col_idx[fill[u]] = ds.num_users + i;
    adj.values[fill[u]++] = w;
    adj.col_idx[fill[ds.num_users + i]] = u;
    adj.values[fill[ds.num_users + i]++] = w;
  }
  // Column order within a row follows train order; sort for a canonical CSR.
  for (int r = 0; r < nodes; ++r) {
    const std::size_t lo = adj.row_ptr[r], hi = adj.row_ptr[r + 1];
    std::vector<std::pair<int, double>> entries;
    entries.reserve(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) entries.emplace_back(adj.col_idx[k], adj.values[k]);
    std::sort(entries.begin(), entries.end());
    for (std::size_t k = lo; k < hi; ++k) {
      adj.col_idx[k] = entries[k - lo].first;
      adj.values[k] = entries[k - lo].second;
    }
  }
  return adj;
}

// out = A * x, rows in CSR order so the reduction order is fixed.
inline void spmm(const NormalizedAdjacency& adj, const Mat& x, Mat& out) {
  out.setZero(x.rows(), x.cols());
  for (int r = 0; r < adj.num_nodes(); ++r) {
    auto row = out.row(r);
    for (std::size_t k = adj.row_ptr[r]; k < adj.row_ptr[r + 1]; ++k) {
      row += adj.values[k] * x.row(adj.col_idx[k]);
    }
  }
}

// Layer outputs e^(0..L) plus their mean, split back into user/item blocks.
struct PropagatedEmbeddings {
  Mat user_final;               // M x D
  Mat item_final;               // N x D
  std::vector<Mat> per_layer;   // L+1 stacked (M+N) x D matrices
  int layers = 0;
};

// e^(l+1) = A e^(l), final = mean over layers 0..L. L = 0 returns the base
// embeddings unchanged.
inline PropagatedEmbeddings propagate(const EmbeddingState& state, const NormalizedAdjacency& adj,
                                      int layers) {
  if (layers < 0) {
    throw std::invalid_argument("propagate: layers must be >= 0");
  }
  const int m = state.num_users();
  const int n = state.num_items();
  PropagatedEmbeddings prop;
  prop.layers = layers;
  prop.per_layer.resize(layers + 1);
  prop.per_layer[0].resize(m + n, state.dim);
  prop.per_layer[0].topRows(m) = state.user_base;
  prop.per_layer[0].bottomRows(n) = state.item_base;
  Mat sum = prop.per_layer[0];
  for (int l = 1; l <= layers; ++l) {
    spmm(adj, prop.per_layer[l - 1], prop.per_layer[l]);
    sum += prop.per_layer[l];
  }
  sum /= static_cast<double>(layers + 1);
  prop.user_final = sum.topRows(m);
  prop.item_final = sum.bottomRows(n);
  return prop;
}

// Pulls a gradient w.r.t. the final embeddings back to the layer-0 tables:
// d e^(0) = (1/(L+1)) sum_l A^l g (A is symmetric).
inline void backprop_propagation(const NormalizedAdjacency& adj, int layers, const Mat& grad_final,
                                 Mat& grad_user_base, Mat& grad_item_base) {
  const int m = adj.num_users;
  const int n = adj.num_items;
  Mat total = grad_final;
  Mat acc = grad_final;
  Mat next;
  for (int l = 1; l <= layers; ++l) {
    spmm(adj, acc, next);
    acc.swap(next);
    total += acc;
  }
  total /= static_cast<double>(layers + 1);
  grad_user_base = total.topRows(m);
  grad_item_base = total.bottomRows(n);
}

// Dot-product score on the final propagated embeddings.
inline double score(const PropagatedEmbeddings& prop, int u, int i) {
  if (u < 0 || u >= prop.user_final.rows() || i < 0 || i >= prop.item_final.rows()) {
    throw IndexOutOfRange("score: user or item index out of range");
  }
  return prop.user_final.row(u).dot(prop.item_final.row(i));
}

}  // namespace paac

#pragma once

#include "paac/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace paac {

struct MmdResult {
  double value = 0.0;
  double bandwidth = 0.0;
  bool degenerate = false;  // all pooled points identical
};

// Squared MMD between the row distributions of two embedding groups:
// Gaussian RBF kernel exp(-|a-b|^2 / bw) with bw the median pairwise squared
// distance over the pooled sample; biased V-statistic, tiny negatives
// clamped to 0.
inline MmdResult mmd(const Mat& group_a, const Mat& group_b) {
  const Eigen::Index m = group_a.rows();
  const Eigen::Index n = group_b.rows();
  if (m == 0 || n == 0) {
    throw std::invalid_argument("mmd: both groups must be nonempty");
  }
  Mat pooled(m + n, group_a.cols());
  pooled.topRows(m) = group_a;
  pooled.bottomRows(n) = group_b;

  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(m + n) * (m + n - 1) / 2);
  for (Eigen::Index i = 0; i < m + n; ++i) {
    for (Eigen::Index j = i + 1; j < m + n; ++j) {
      d2.push_back((pooled.row(i) - pooled.row(j)).squaredNorm());
    }
  }
  MmdResult res;
  if (d2.empty()) {
    res.degenerate = true;
    return res;
  }
  const std::size_t mid = (d2.size() - 1) / 2;  // lower median
  std::nth_element(d2.begin(), d2.begin() + mid, d2.end());
  res.bandwidth = d2[mid];
  if (res.bandwidth <= 0.0) {
    res.degenerate = true;
    return res;
  }
  auto kernel_sum = [&](const Mat& x, const Mat& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        s += std::exp(-(x.row(i) - y.row(j)).squaredNorm() / res.bandwidth);
      }
    }
    return s;
  };
  const double mm = static_cast<double>(m);
  const double nn = static_cast<double>(n);
  const double v = kernel_sum(group_a, group_a) / (mm * mm) +
                   kernel_sum(group_b, group_b) / (nn * nn) -
                   2.0 * kernel_sum(group_a, group_b) / (mm * nn);
  res.value = std::max(v, 0.0);
  return res;
}

// Mean cosine similarity over all cross-group row pairs; zero rows excluded.
inline double cross_cosine(const Mat& group_a, const Mat& group_b) {
  if (group_a.rows() == 0 || group_b.rows() == 0) {
    throw std::invalid_argument("cross_cosine: both groups must be nonempty");
  }
  double sum = 0.0;
  std::int64_t pairs = 0;
  for (Eigen::Index i = 0; i < group_a.rows(); ++i) {
    const double na = group_a.row(i).norm();
    if (na == 0.0) continue;
    for (Eigen::Index j = 0; j < group_b.rows(); ++j) {
      const double nb = group_b.row(j).norm();
      if (nb == 0.0) continue;
      sum += group_a.row(i).dot(group_b.row(j)) / (na * nb);
      ++pairs;
    }
  }
  return pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
}

// Centroid variant: cosine between the two group means.
inline double centroid_cosine(const Mat& group_a, const Mat& group_b) {
  if (group_a.rows() == 0 || group_b.rows() == 0) {
    throw std::invalid_argument("centroid_cosine: both groups must be nonempty");
  }
  const Vec ca = group_a.colwise().mean();
  const Vec cb = group_b.colwise().mean();
  const double na = ca.norm(), nb = cb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ca.dot(cb) / (na * nb);
}

struct SeparationReport {
  double mmd_value = 0.0;
  double bandwidth = 0.0;
  bool mmd_degenerate = false;
  double cross_cosine_value = 0.0;
  double centroid_cosine_value = 0.0;
};

inline SeparationReport separation_report(const Mat& group_a, const Mat& group_b) {
  SeparationReport rep;
  const MmdResult r = mmd(group_a, group_b);
  rep.mmd_value = r.value;
  rep.bandwidth = r.bandwidth;
  rep.mmd_degenerate = r.degenerate;
  rep.cross_cosine_value = cross_cosine(group_a, group_b);
  rep.centroid_cosine_value = centroid_cosine(group_a, group_b);
  return rep;
}

}  // namespace paac

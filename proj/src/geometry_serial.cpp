#include <algorithm>
#include <vector>

#include "pcfss/geometry.hpp"

// Reference kernels: straightforward double loops, no pragmas. These stay the
// ground truth for the OpenMP versions in geometry.cpp.

namespace pcfss::serial {

Mat pairwise_sq_dist(const Mat& a, const Mat& b) {
  require(a.cols() == b.cols(), "pairwise_sq_dist: dimension mismatch");
  Mat out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (int c = 0; c < a.cols(); ++c) {
        double diff = a(i, c) - b(j, c);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  }
  return out;
}

NeighborIndex knn_indices(const Mat& points, int k, bool include_self) {
  const int n = static_cast<int>(points.rows());
  require(n >= 1, "knn_indices: empty input");
  const int avail = include_self ? n : n - 1;
  require(k >= 0 && k <= avail, "knn_indices: k too large");
  NeighborIndex out;
  out.k = k;
  out.include_self = include_self;
  out.indices.resize(n, k);
  out.sq_dists.resize(n, k);
  Mat d = pairwise_sq_dist(points, points);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> cand;
    cand.reserve(n);
    for (int j = 0; j < n; ++j) {
      if (!include_self && j == i) continue;
      cand.push_back({d(i, j), j});
    }
    std::sort(cand.begin(), cand.end());
    for (int c = 0; c < k; ++c) {
      out.sq_dists(i, c) = cand[c].first;
      out.indices(i, c) = cand[c].second;
    }
  }
  return out;
}

SeedIndex fps(const Mat& features, int m, int start) {
  const int n = static_cast<int>(features.rows());
  require(n >= 1, "fps: empty input");
  require(m >= 1 && start >= 0 && start < n, "fps: bad arguments");
  const int count = std::min(m, n);
  Mat d = pairwise_sq_dist(features, features);

  SeedIndex out;
  out.start = start;
  out.order.push_back(start);
  std::vector<bool> chosen(n, false);
  chosen[start] = true;

  for (int t = 1; t < count; ++t) {
    int best = -1;
    double best_d = -1.0;
    for (int j = 0; j < n; ++j) {
      if (chosen[j]) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (int s : out.order) mind = std::min(mind, d(j, s));
      if (mind > best_d) {
        best_d = mind;
        best = j;
      }
    }
    out.order.push_back(best);
    chosen[best] = true;
  }
  return out;
}

}  // namespace pcfss::serial

#include "pcfss/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pcfss {

Mat pairwise_sq_dist(const Mat& a, const Mat& b) {
  require(a.cols() == b.cols(), "pairwise_sq_dist: dimension mismatch");
  require_finite(a, "pairwise_sq_dist a");
  require_finite(b, "pairwise_sq_dist b");
  const int n1 = static_cast<int>(a.rows());
  const int n2 = static_cast<int>(b.rows());
  const int d = static_cast<int>(a.cols());
  Mat out(n1, n2);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
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
  require(k >= 0, "knn_indices: negative k");
  const int avail = include_self ? n : n - 1;
  require(k <= avail, "knn_indices: k too large (" + std::to_string(k) +
                          " > " + std::to_string(avail) + ")");
  NeighborIndex out;
  out.k = k;
  out.include_self = include_self;
  out.indices.resize(n, k);
  out.sq_dists.resize(n, k);
  if (k == 0) return out;

#pragma omp parallel
  {
    std::vector<std::pair<double, int>> cand(n);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      int m = 0;
      for (int j = 0; j < n; ++j) {
        if (!include_self && j == i) continue;
        double s = (points.row(i) - points.row(j)).squaredNorm();
        cand[m++] = {s, j};
      }
      // (distance, index) pairs: lexicographic order breaks ties toward the
      // lower index
      std::partial_sort(cand.begin(), cand.begin() + k, cand.begin() + m);
      for (int c = 0; c < k; ++c) {
        out.sq_dists(i, c) = cand[c].first;
        out.indices(i, c) = cand[c].second;
      }
    }
  }
  return out;
}

SeedIndex fps(const Mat& features, int m, int start) {
  const int n = static_cast<int>(features.rows());
  require(n >= 1, "fps: empty input");
  require(m >= 1, "fps: m must be >= 1");
  require(start >= 0 && start < n, "fps: start index out of range");
  const int count = std::min(m, n);

  SeedIndex out;
  out.start = start;
  out.order.reserve(count);
  out.order.push_back(start);

  std::vector<double> min_sq(n);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j)
    min_sq[j] = (features.row(j) - features.row(start)).squaredNorm();
  min_sq[start] = -1.0;  // chosen points never win the argmax

  for (int t = 1; t < count; ++t) {
    const int last = out.order.back();
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
      if (min_sq[j] < 0.0) continue;
      double s = (features.row(j) - features.row(last)).squaredNorm();
      if (s < min_sq[j]) min_sq[j] = s;
    }
    // serial argmax scan; strict > keeps the lowest index on ties
    int best = -1;
    double best_d = -1.0;
    for (int j = 0; j < n; ++j) {
      if (min_sq[j] > best_d) {
        best_d = min_sq[j];
        best = j;
      }
    }
    out.order.push_back(best);
    min_sq[best] = -1.0;
  }
  return out;
}

Mat jitter(const Mat& coords, double sigma, double clip, Rng& rng) {
  require(sigma >= 0.0, "jitter: sigma must be >= 0");
  require(clip >= 0.0, "jitter: clip must be >= 0");
  Mat out = coords;
  const int n = static_cast<int>(coords.rows());
  const int d = static_cast<int>(coords.cols());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      double noise = std::clamp(rng.normal(0.0, sigma), -clip, clip);
      out(i, c) += noise;
    }
  }
  return out;
}

Mat rotate_z(const Mat& coords, double angle) {
  require(coords.cols() == 3, "rotate_z: expects n x 3 coordinates");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat out = coords;
  const int n = static_cast<int>(coords.rows());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double x = coords(i, 0), y = coords(i, 1);
    out(i, 0) = c * x - s * y;
    out(i, 1) = s * x + c * y;
  }
  return out;
}

}  // namespace pcfss

#pragma once

#include <vector>

#include "pcfss/common.hpp"
#include "pcfss/rng.hpp"

namespace pcfss {

// k nearest neighbors per point. Row i holds the k neighbor indices of point
// i sorted by ascending squared distance, ties broken toward the lower index.
struct NeighborIndex {
  IMat indices;  // n x k
  Mat sq_dists;  // n x k
  int k = 0;
  bool include_self = false;
};

// Farthest-point sampling result: visit order plus the start index used.
struct SeedIndex {
  std::vector<int> order;
  int start = 0;
};

// OpenMP-parallel kernels. Every output entry is produced by exactly one
// thread with a fixed inner summation order, so results are bitwise
// reproducible for any thread count.
Mat pairwise_sq_dist(const Mat& a, const Mat& b);
NeighborIndex knn_indices(const Mat& points, int k, bool include_self);
SeedIndex fps(const Mat& features, int m, int start);

// Augmentations (coordinates only, labels untouched by construction).
Mat jitter(const Mat& coords, double sigma, double clip, Rng& rng);
Mat rotate_z(const Mat& coords, double angle);

// Plain-loop reference implementations, kept as the oracle for the parallel
// kernels above and for the kernel benchmark.
namespace serial {
Mat pairwise_sq_dist(const Mat& a, const Mat& b);
NeighborIndex knn_indices(const Mat& points, int k, bool include_self);
SeedIndex fps(const Mat& features, int m, int start);
}  // namespace serial

}  // namespace pcfss

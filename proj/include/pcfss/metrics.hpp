#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "pcfss/common.hpp"

namespace pcfss {

// tp / fp / fn counters per global class id
struct Confusion {
  std::map<int, std::array<int64_t, 3>> counts;

  // pred/gt in episode-local space (0 = background); class_ids maps local
  // 1..N to global ids; local background maps to global 0
  void accumulate(const std::vector<int>& pred, const std::vector<int>& gt,
                  const std::vector<int>& class_ids);
  void merge(const Confusion& other);

  // tp / (tp + fp + fn); classes with zero denominator are absent
  std::map<int, double> per_class_iou() const;
  // mean over the listed classes that are present; include_bg adds class 0
  double miou(const std::vector<int>& over_classes, bool include_bg) const;
};

struct ErrorBreakdown {
  int64_t fg_err = 0;  // ground-truth foreground predicted background
  int64_t bg_err = 0;  // ground-truth background predicted foreground

  void accumulate(const std::vector<int>& pred, const std::vector<int>& gt);
};

}  // namespace pcfss

#include "pcfss/metrics.hpp"

namespace pcfss {

void Confusion::accumulate(const std::vector<int>& pred,
                           const std::vector<int>& gt,
                           const std::vector<int>& class_ids) {
  require(pred.size() == gt.size(), "Confusion: size mismatch");
  auto to_global = [&](int local) {
    if (local == 0) return 0;
    require(local >= 1 && local <= static_cast<int>(class_ids.size()),
            "Confusion: local class out of range");
    return class_ids[local - 1];
  };
  for (size_t i = 0; i < pred.size(); ++i) {
    int p = to_global(pred[i]);
    int g = to_global(gt[i]);
    if (p == g) {
      counts[g][0] += 1;  // tp
    } else {
      counts[p][1] += 1;  // fp for predicted class
      counts[g][2] += 1;  // fn for true class
    }
  }
}

void Confusion::merge(const Confusion& other) {
  for (const auto& [cls, c] : other.counts) {
    counts[cls][0] += c[0];
    counts[cls][1] += c[1];
    counts[cls][2] += c[2];
  }
}

std::map<int, double> Confusion::per_class_iou() const {
  std::map<int, double> out;
  for (const auto& [cls, c] : counts) {
    int64_t denom = c[0] + c[1] + c[2];
    if (denom > 0) out[cls] = static_cast<double>(c[0]) / denom;
  }
  return out;
}

double Confusion::miou(const std::vector<int>& over_classes,
                       bool include_bg) const {
  auto iou = per_class_iou();
  double sum = 0.0;
  int n = 0;
  for (int cls : over_classes) {
    auto it = iou.find(cls);
    if (it != iou.end()) {
      sum += it->second;
      ++n;
    }
  }
  if (include_bg) {
    auto it = iou.find(0);
    if (it != iou.end()) {
      sum += it->second;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

void ErrorBreakdown::accumulate(const std::vector<int>& pred,
                                const std::vector<int>& gt) {
  require(pred.size() == gt.size(), "ErrorBreakdown: size mismatch");
  for (size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] > 0 && pred[i] == 0) fg_err += 1;
    if (gt[i] == 0 && pred[i] > 0) bg_err += 1;
  }
}

}  // namespace pcfss

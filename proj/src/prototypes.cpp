#include "pcfss/prototypes.hpp"

#include <algorithm>

namespace pcfss {

int PrototypeSet::total_rows() const {
  int n = 0;
  for (const auto& p : protos) n += static_cast<int>(p.rows());
  return n;
}

std::vector<int> PrototypeSet::offsets() const {
  std::vector<int> off(1, 0);
  for (const auto& p : protos)
    off.push_back(off.back() + static_cast<int>(p.rows()));
  return off;
}

Mat PrototypeSet::stacked() const {
  Mat out(total_rows(), dim());
  int at = 0;
  for (const auto& p : protos) {
    out.middleRows(at, p.rows()) = p;
    at += static_cast<int>(p.rows());
  }
  return out;
}

MaskPoolResult mask_pool(const Mat& f, const std::vector<int>& y) {
  const int n = static_cast<int>(f.rows());
  require(static_cast<int>(y.size()) == n, "mask_pool: mask length mismatch");
  for (int v : y) require(v == 0 || v == 1, "mask_pool: mask must be binary");

  MaskPoolResult r;
  r.fg = Vec::Zero(f.cols());
  r.bg = Vec::Zero(f.cols());
  int n_fg = 0, n_bg = 0;
  for (int i = 0; i < n; ++i) {
    if (y[i] == 1) {
      r.fg += f.row(i).transpose();
      ++n_fg;
    } else {
      r.bg += f.row(i).transpose();
      ++n_bg;
    }
  }
  if (n_fg > 0)
    r.fg /= n_fg;
  else {
    r.fg.setZero();
    r.fg_empty = true;
  }
  if (n_bg > 0)
    r.bg /= n_bg;
  else {
    r.bg.setZero();
    r.bg_empty = true;
  }
  return r;
}

MergedShots merge_shots(const std::vector<Mat>& features,
                        const std::vector<std::vector<int>>& masks) {
  require(!features.empty(), "merge_shots: no shots");
  require(features.size() == masks.size(), "merge_shots: shot count mismatch");
  const int d = static_cast<int>(features[0].cols());
  int rows = 0;
  for (size_t s = 0; s < features.size(); ++s) {
    require(features[s].cols() == d, "merge_shots: feature dim mismatch");
    require(features[s].rows() == static_cast<int>(masks[s].size()),
            "merge_shots: mask length mismatch");
    rows += static_cast<int>(features[s].rows());
  }
  MergedShots out;
  out.features.resize(rows, d);
  out.mask.reserve(rows);
  int at = 0;
  for (size_t s = 0; s < features.size(); ++s) {
    out.features.middleRows(at, features[s].rows()) = features[s];
    out.mask.insert(out.mask.end(), masks[s].begin(), masks[s].end());
    at += static_cast<int>(features[s].rows());
  }
  return out;
}

MultiProtoResult multi_prototype_generate(const Mat& f,
                                          const std::vector<int>& y, int m,
                                          int start,
                                          const std::string& category_name) {
  require(m >= 1, "multi_prototype_generate: m must be >= 1");
  const int n = static_cast<int>(f.rows());
  require(static_cast<int>(y.size()) == n,
          "multi_prototype_generate: mask length mismatch");

  std::vector<int> member_rows;
  for (int i = 0; i < n; ++i) {
    require(y[i] == 0 || y[i] == 1,
            "multi_prototype_generate: mask must be binary");
    if (y[i] == 1) member_rows.push_back(i);
  }
  require(!member_rows.empty(),
          "multi_prototype_generate: category '" + category_name +
              "' has no points");

  const int count = static_cast<int>(member_rows.size());
  Mat sub(count, f.cols());
  for (int i = 0; i < count; ++i) sub.row(i) = f.row(member_rows[i]);

  require(start >= 0 && start < count,
          "multi_prototype_generate: start out of range");
  SeedIndex seeds = fps(sub, m, start);
  const int n_seed = static_cast<int>(seeds.order.size());

  MultiProtoResult out;
  out.assignment.seed_rows = seeds.order;
  out.assignment.member_rows = member_rows;
  out.assignment.assign.resize(count);
  out.assignment.counts.assign(n_seed, 0);

  Mat seed_f(n_seed, f.cols());
  for (int s = 0; s < n_seed; ++s) seed_f.row(s) = sub.row(seeds.order[s]);
  Mat d = pairwise_sq_dist(sub, seed_f);
  for (int i = 0; i < count; ++i) {
    int best = 0;
    for (int s = 1; s < n_seed; ++s)
      if (d(i, s) < d(i, best)) best = s;  // strict <: ties keep lower ordinal
    out.assignment.assign[i] = best;
    out.assignment.counts[best] += 1;
  }

  out.prototypes = Mat::Zero(n_seed, f.cols());
  for (int i = 0; i < count; ++i)
    out.prototypes.row(out.assignment.assign[i]) += sub.row(i);
  for (int s = 0; s < n_seed; ++s) {
    if (out.assignment.counts[s] > 0)
      out.prototypes.row(s) /= out.assignment.counts[s];
    else
      out.prototypes.row(s) = sub.row(seeds.order[s]);  // empty-seed fallback
  }
  return out;
}

Mat assignment_pooling(int n_total, const SeedAssignment& a) {
  const int n_seed = static_cast<int>(a.counts.size());
  Mat p = Mat::Zero(n_seed, n_total);
  for (size_t i = 0; i < a.assign.size(); ++i) {
    int s = a.assign[i];
    p(s, a.member_rows[i]) = 1.0 / a.counts[s];
  }
  for (int s = 0; s < n_seed; ++s)
    if (a.counts[s] == 0) p(s, a.member_rows[a.seed_rows[s]]) = 1.0;
  return p;
}

Mat mask_pooling_row(const std::vector<int>& y, int side) {
  const int n = static_cast<int>(y.size());
  Mat row = Mat::Zero(1, n);
  int count = 0;
  for (int i = 0; i < n; ++i)
    if ((y[i] == 1) == (side == 1)) ++count;
  if (count == 0) return row;
  for (int i = 0; i < n; ++i)
    if ((y[i] == 1) == (side == 1)) row(0, i) = 1.0 / count;
  return row;
}

FlattenedPrototypes flatten_for_bpa(const PrototypeSet& ps) {
  require(ps.categories() >= 2, "flatten_for_bpa: incomplete prototype set");
  FlattenedPrototypes out;
  out.bg = ps.protos[0];
  int fg_total = 0;
  for (int c = 1; c < ps.categories(); ++c) {
    out.fg_rows.push_back(static_cast<int>(ps.protos[c].rows()));
    fg_total += out.fg_rows.back();
  }
  out.fg.resize(fg_total, ps.dim());
  int at = 0;
  for (int c = 1; c < ps.categories(); ++c) {
    out.fg.middleRows(at, ps.protos[c].rows()) = ps.protos[c];
    at += static_cast<int>(ps.protos[c].rows());
  }
  return out;
}

PrototypeSet unflatten_from_bpa(const FlattenedPrototypes& flat,
                                const PrototypeSet& original) {
  PrototypeSet out = original;
  out.protos[0] = flat.bg;
  int at = 0;
  for (size_t c = 0; c < flat.fg_rows.size(); ++c) {
    out.protos[c + 1] = flat.fg.middleRows(at, flat.fg_rows[c]);
    at += flat.fg_rows[c];
  }
  return out;
}

}  // namespace pcfss

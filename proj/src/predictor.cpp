#include "pcfss/predictor.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "pcfss/geometry.hpp"

namespace pcfss {

using ad::Tape;
using ad::Var;

Mat cosine_predict(const Mat& f_q, const PrototypeSet& ps, double t) {
  require(t > 0.0, "cosine_predict: temperature must be > 0");
  require(ps.dim() == f_q.cols(), "cosine_predict: feature dim mismatch");
  bool any_live = false;
  for (char d : ps.degenerate)
    if (!d) any_live = true;
  require(any_live, "cosine_predict: all prototypes degenerate");

  const int n = static_cast<int>(f_q.rows());
  const int c = ps.categories();
  Mat fhat = f_q;
  for (int i = 0; i < n; ++i) {
    double nm = fhat.row(i).norm();
    if (nm > 0.0)
      fhat.row(i) /= nm;
    else
      fhat.row(i).setZero();
  }
  Mat logits(n, c);
  for (int cat = 0; cat < c; ++cat) {
    Mat phat = ps.protos[cat];
    for (int m = 0; m < phat.rows(); ++m) {
      double nm = phat.row(m).norm();
      if (nm > 0.0)
        phat.row(m) /= nm;
      else
        phat.row(m).setZero();
    }
    Mat cs = fhat * phat.transpose();  // n x m
    logits.col(cat) = t * cs.rowwise().maxCoeff();
  }
  return logits;
}

double median_pairwise_distance(const Mat& nodes) {
  const int n = static_cast<int>(nodes.rows());
  require(n >= 2, "median_pairwise_distance: need at least 2 nodes");
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      d.push_back((nodes.row(i) - nodes.row(j)).norm());
  size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return std::max(d[mid], 1e-9);
}

namespace {
// union-symmetrized directed kNN mask, zero diagonal
Mat knn_union_mask(const Mat& nodes, int k) {
  const int n = static_cast<int>(nodes.rows());
  NeighborIndex nb = knn_indices(nodes, k, false);
  Mat mask = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      mask(i, nb.indices(i, j)) = 1.0;
      mask(nb.indices(i, j), i) = 1.0;
    }
  }
  return mask;
}
}  // namespace

PropagationGraph build_knn_graph(const Mat& nodes, int k, double bandwidth) {
  const int n = static_cast<int>(nodes.rows());
  require(k >= 1 && k < n, "build_knn_graph: need 1 <= k < node count");
  require(bandwidth > 0.0, "build_knn_graph: bandwidth must be > 0");

  PropagationGraph g;
  g.k = k;
  g.bandwidth = bandwidth;
  Mat mask = knn_union_mask(nodes, k);
  Mat d2 = pairwise_sq_dist(nodes, nodes);
  Mat w =
      (d2.array() * (-1.0 / (2.0 * bandwidth * bandwidth))).exp() * mask.array();
  Vec deg = w.rowwise().sum();
  Vec dinv = (deg.array() + 1e-30).rsqrt();
  g.S = dinv.asDiagonal() * w.matrix() * dinv.asDiagonal();
  return g;
}

Mat propagation_labels(int n_query, const std::vector<int>& proto_category,
                       int n_categories) {
  Mat y = Mat::Zero(n_query + static_cast<int>(proto_category.size()),
                    n_categories);
  for (size_t p = 0; p < proto_category.size(); ++p) {
    require(proto_category[p] >= 0 && proto_category[p] < n_categories,
            "propagation_labels: category out of range");
    y(n_query + static_cast<int>(p), proto_category[p]) = 1.0;
  }
  return y;
}

Mat propagate_closed_form(const PropagationGraph& g) {
  require(g.alpha >= 0.0 && g.alpha < 1.0,
          "propagate_closed_form: alpha must be in [0, 1)");
  require(g.Y.rows() == g.S.rows(), "propagate_closed_form: Y row mismatch");
  const int n = static_cast<int>(g.S.rows());
  Mat a = Mat::Identity(n, n) - g.alpha * g.S;
  Eigen::PartialPivLU<Mat> lu(a);
  double rcond = lu.rcond();
  require(std::isfinite(rcond) && rcond > 1e-14,
          "propagate_closed_form: near-singular system (rcond=" +
              std::to_string(rcond) + ")");
  return lu.solve(g.Y);
}

Mat propagate_iterative(const PropagationGraph& g, int steps) {
  require(steps >= 1, "propagate_iterative: steps must be >= 1");
  require(g.Y.rows() == g.S.rows(), "propagate_iterative: Y row mismatch");
  Mat z = g.Y;
  for (int s = 0; s < steps; ++s) z = g.alpha * (g.S * z) + (1.0 - g.alpha) * g.Y;
  return z;
}

Mat logits_from_propagation(const Mat& z, int n_query) {
  require(z.rows() >= n_query, "logits_from_propagation: too few rows");
  return z.topRows(n_query);
}

// ---------------------------------------------------------------------------
// tape-level prediction

namespace {

Var cosine_predict_t(Tape& t, const ProtoVars& ps, Var f_q, double temp) {
  bool any_live = false;
  for (char d : ps.degenerate)
    if (!d) any_live = true;
  require(any_live, "predict_logits: all prototypes degenerate");
  Var fhat = t.row_normalize(f_q);
  Var stacked = t.concat_rows(ps.protos);
  Var phat = t.row_normalize(stacked);
  Var cs = t.matmul_nt(fhat, phat);
  std::vector<int> offsets(1, 0);
  for (Var p : ps.protos)
    offsets.push_back(offsets.back() + static_cast<int>(t.val(p).rows()));
  return t.scale(t.group_cols_max(cs, std::move(offsets)), temp);
}

Var mpti_predict_t(Tape& t, const ProtoVars& ps, Var f_q,
                   const PredictorConfig& cfg) {
  const int n = static_cast<int>(t.val(f_q).rows());
  const int c = static_cast<int>(ps.protos.size());
  std::vector<Var> parts{f_q};
  std::vector<int> proto_cat;
  for (int cat = 0; cat < c; ++cat) {
    parts.push_back(ps.protos[cat]);
    for (int m = 0; m < t.val(ps.protos[cat]).rows(); ++m)
      proto_cat.push_back(cat);
  }
  Var nodes = t.concat_rows(parts);

  double bw = cfg.bandwidth > 0.0 ? cfg.bandwidth
                                  : median_pairwise_distance(t.val(nodes));
  // the kNN mask is a discrete function of the node values
  Mat mask = knn_union_mask(t.val(nodes), cfg.graph_k);
  Var d2 = t.pairwise_sqdist(nodes);
  Var w = t.mask(t.cwise_exp(t.scale(d2, -1.0 / (2.0 * bw * bw))), mask);
  Var dinv = t.rsqrt(t.row_sum(w), 1e-30);
  Var s = t.scale_cols(t.scale_rows(w, dinv), dinv);
  Mat y = propagation_labels(n, proto_cat, c);
  Var z = t.solve_propagation(s, t.leaf(std::move(y)), cfg.alpha);
  return t.slice_rows(z, 0, n);
}

}  // namespace

Var predict_logits(Tape& t, const ProtoVars& ps, Var f_q,
                   const PredictorConfig& cfg) {
  require(!ps.protos.empty(), "predict_logits: empty prototype set");
  switch (cfg.kind) {
    case PredictorConfig::Kind::Proto:
      return cosine_predict_t(t, ps, f_q, cfg.t);
    case PredictorConfig::Kind::Mpti:
      return mpti_predict_t(t, ps, f_q, cfg);
  }
  throw PcfssError("predict_logits: unknown predictor kind");
}

}  // namespace pcfss

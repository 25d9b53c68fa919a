#include "pcfss/autodiff.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <memory>

namespace pcfss::ad {

namespace {
void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
              "x" + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}
}  // namespace

void Tape::check(Var v) const {
  require(v.id >= 0 && v.id < static_cast<int>(nodes_.size()),
          "Tape: invalid Var handle");
}

Var Tape::push(Mat value, bool requires_grad, std::function<void(Tape&)> bp) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.bp = std::move(bp);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::leaf_param(Param& p) {
  Var v = push(p.value, true, nullptr);
  bindings_.push_back({v.id, &p});
  return v;
}

const Mat& Tape::val(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

const Mat& Tape::grad(Var v) const {
  check(v);
  return nodes_[v.id].grad;
}

// ---------------------------------------------------------------------------
// elementwise

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(val(a), val(b), "add");
  bool r = rg(a) || rg(b);
  Var out = push(val(a) + val(b), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(a)) t.grad_ref(a.id) += g;
      if (t.rg(b)) t.grad_ref(b.id) += g;
    };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(val(a), val(b), "sub");
  bool r = rg(a) || rg(b);
  Var out = push(val(a) - val(b), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(a)) t.grad_ref(a.id) += g;
      if (t.rg(b)) t.grad_ref(b.id) -= g;
    };
  return out;
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(val(a), val(b), "mul");
  bool r = rg(a) || rg(b);
  Var out = push(val(a).cwiseProduct(val(b)), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(a)) t.grad_ref(a.id) += g.cwiseProduct(t.val(b));
      if (t.rg(b)) t.grad_ref(b.id) += g.cwiseProduct(t.val(a));
    };
  return out;
}

Var Tape::scale(Var a, double s) { return affine(a, s, 0.0); }

Var Tape::affine(Var a, double mul, double add) {
  check(a);
  bool r = rg(a);
  Var out = push((val(a).array() * mul + add).matrix(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, mul](Tape& t) {
      t.grad_ref(a.id) += mul * t.nodes_[out.id].grad;
    };
  return out;
}

Var Tape::relu(Var a) {
  check(a);
  bool r = rg(a);
  Var out = push(val(a).cwiseMax(0.0), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& x = t.val(a);
      t.grad_ref(a.id).array() += g.array() * (x.array() > 0.0).cast<double>();
    };
  return out;
}

Var Tape::sigmoid(Var a) {
  check(a);
  bool r = rg(a);
  Mat s = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
  Var out = push(std::move(s), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& y = t.nodes_[out.id].value;
      t.grad_ref(a.id).array() += g.array() * y.array() * (1.0 - y.array());
    };
  return out;
}

Var Tape::cwise_exp(Var a) {
  check(a);
  bool r = rg(a);
  Var out = push(val(a).array().exp().matrix(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      t.grad_ref(a.id).array() +=
          t.nodes_[out.id].grad.array() * t.nodes_[out.id].value.array();
    };
  return out;
}

Var Tape::cwise_abs(Var a) {
  check(a);
  bool r = rg(a);
  Var out = push(val(a).cwiseAbs(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& x = t.val(a);
      t.grad_ref(a.id).array() += g.array() * x.array().sign();
    };
  return out;
}

Var Tape::mask(Var a, const Mat& m01) {
  check(a);
  check_same_shape(val(a), m01, "mask");
  bool r = rg(a);
  Var out = push(val(a).cwiseProduct(m01), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, m01](Tape& t) {
      t.grad_ref(a.id) += t.nodes_[out.id].grad.cwiseProduct(m01);
    };
  return out;
}

Var Tape::rsqrt(Var a, double eps) {
  check(a);
  bool r = rg(a);
  Mat y = (val(a).array() + eps).rsqrt().matrix();
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& y = t.nodes_[out.id].value;
      // d(1/sqrt(x+eps))/dx = -0.5 * y^3
      t.grad_ref(a.id).array() += g.array() * (-0.5) * y.array().cube();
    };
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  require(val(a).cols() == val(b).rows(), "matmul: inner dimension mismatch");
  bool r = rg(a) || rg(b);
  Var out = push(val(a) * val(b), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(a)) t.grad_ref(a.id).noalias() += g * t.val(b).transpose();
      if (t.rg(b)) t.grad_ref(b.id).noalias() += t.val(a).transpose() * g;
    };
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  require(val(a).cols() == val(b).cols(),
          "matmul_nt: inner dimension mismatch");
  bool r = rg(a) || rg(b);
  Var out = push(val(a) * val(b).transpose(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(a)) t.grad_ref(a.id).noalias() += g * t.val(b);
      if (t.rg(b)) t.grad_ref(b.id).noalias() += g.transpose() * t.val(a);
    };
  return out;
}

Var Tape::add_row_bias(Var x, Var bias_1xd) {
  check(x);
  check(bias_1xd);
  require(val(bias_1xd).rows() == 1 && val(bias_1xd).cols() == val(x).cols(),
          "add_row_bias: bias must be 1 x cols(x)");
  bool r = rg(x) || rg(bias_1xd);
  Mat y = val(x).rowwise() + val(bias_1xd).row(0);
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, x, bias_1xd](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(x)) t.grad_ref(x.id) += g;
      if (t.rg(bias_1xd)) t.grad_ref(bias_1xd.id) += g.colwise().sum();
    };
  return out;
}

Var Tape::scale_rows(Var x, Var v_nx1) {
  check(x);
  check(v_nx1);
  require(val(v_nx1).cols() == 1 && val(v_nx1).rows() == val(x).rows(),
          "scale_rows: v must be rows(x) x 1");
  bool r = rg(x) || rg(v_nx1);
  Mat y = val(v_nx1).col(0).asDiagonal() * val(x);
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, x, v_nx1](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(x))
        t.grad_ref(x.id).noalias() += t.val(v_nx1).col(0).asDiagonal() * g;
      if (t.rg(v_nx1))
        t.grad_ref(v_nx1.id).col(0) +=
            g.cwiseProduct(t.val(x)).rowwise().sum();
    };
  return out;
}

Var Tape::scale_cols(Var x, Var v_nx1) {
  check(x);
  check(v_nx1);
  require(val(v_nx1).cols() == 1 && val(v_nx1).rows() == val(x).cols(),
          "scale_cols: v must be cols(x) x 1");
  bool r = rg(x) || rg(v_nx1);
  Mat y = val(x) * val(v_nx1).col(0).asDiagonal();
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, x, v_nx1](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      if (t.rg(x))
        t.grad_ref(x.id).noalias() += g * t.val(v_nx1).col(0).asDiagonal();
      if (t.rg(v_nx1))
        t.grad_ref(v_nx1.id).col(0) +=
            g.cwiseProduct(t.val(x)).colwise().sum().transpose();
    };
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

Var Tape::concat_cols(Var a, Var b) {
  check(a);
  check(b);
  require(val(a).rows() == val(b).rows(), "concat_cols: row mismatch");
  bool r = rg(a) || rg(b);
  Mat y(val(a).rows(), val(a).cols() + val(b).cols());
  y << val(a), val(b);
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, b](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const int ca = static_cast<int>(t.val(a).cols());
      const int cb = static_cast<int>(t.val(b).cols());
      if (t.rg(a)) t.grad_ref(a.id) += g.leftCols(ca);
      if (t.rg(b)) t.grad_ref(b.id) += g.rightCols(cb);
    };
  return out;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  int rows = 0;
  const int cols = static_cast<int>(val(parts[0]).cols());
  bool r = false;
  for (Var p : parts) {
    check(p);
    require(val(p).cols() == cols, "concat_rows: column mismatch");
    rows += static_cast<int>(val(p).rows());
    r = r || rg(p);
  }
  Mat y(rows, cols);
  int at = 0;
  for (Var p : parts) {
    y.middleRows(at, val(p).rows()) = val(p);
    at += static_cast<int>(val(p).rows());
  }
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, parts](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      int at = 0;
      for (Var p : parts) {
        const int n = static_cast<int>(t.val(p).rows());
        if (t.rg(p)) t.grad_ref(p.id) += g.middleRows(at, n);
        at += n;
      }
    };
  return out;
}

Var Tape::slice_rows(Var a, int start, int count) {
  check(a);
  require(start >= 0 && count >= 0 && start + count <= val(a).rows(),
          "slice_rows: range out of bounds");
  bool r = rg(a);
  Var out = push(val(a).middleRows(start, count), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, start, count](Tape& t) {
      t.grad_ref(a.id).middleRows(start, count) += t.nodes_[out.id].grad;
    };
  return out;
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  check(a);
  const int n = static_cast<int>(val(a).rows());
  for (int i : idx)
    require(i >= 0 && i < n, "gather_rows: index out of range");
  bool r = rg(a);
  Mat y(static_cast<int>(idx.size()), val(a).cols());
  for (size_t i = 0; i < idx.size(); ++i) y.row(i) = val(a).row(idx[i]);
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, idx = std::move(idx)](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      Mat& ga = t.grad_ref(a.id);
      for (size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(i);
    };
  return out;
}

Var Tape::repeat_row(Var row_1xd, int n) {
  check(row_1xd);
  require(val(row_1xd).rows() == 1, "repeat_row: expects a 1 x d input");
  require(n >= 1, "repeat_row: n must be >= 1");
  bool r = rg(row_1xd);
  Mat y = val(row_1xd).replicate(n, 1);
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, row_1xd](Tape& t) {
      t.grad_ref(row_1xd.id) += t.nodes_[out.id].grad.colwise().sum();
    };
  return out;
}

// ---------------------------------------------------------------------------
// reductions

Var Tape::row_sum(Var a) {
  check(a);
  bool r = rg(a);
  Var out = push(val(a).rowwise().sum(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      t.grad_ref(a.id).colwise() += g.col(0);
    };
  return out;
}

Var Tape::row_mean(Var a) {
  check(a);
  const double inv_n = 1.0 / static_cast<double>(val(a).rows());
  bool r = rg(a);
  Var out = push(val(a).colwise().mean(), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, inv_n](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      t.grad_ref(a.id).rowwise() += (inv_n * g).row(0);
    };
  return out;
}

Var Tape::sum_all(Var a) {
  check(a);
  bool r = rg(a);
  Mat y(1, 1);
  y(0, 0) = val(a).sum();
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      t.grad_ref(a.id).array() += t.nodes_[out.id].grad(0, 0);
    };
  return out;
}

Var Tape::mean_all(Var a) {
  check(a);
  const double inv = 1.0 / static_cast<double>(val(a).size());
  bool r = rg(a);
  Mat y(1, 1);
  y(0, 0) = val(a).mean();
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, inv](Tape& t) {
      t.grad_ref(a.id).array() += inv * t.nodes_[out.id].grad(0, 0);
    };
  return out;
}

Var Tape::group_rows_max(Var a, int group) {
  check(a);
  require(group >= 1, "group_rows_max: group must be >= 1");
  const int rows = static_cast<int>(val(a).rows());
  require(rows % group == 0, "group_rows_max: rows not divisible by group");
  const int n = rows / group;
  const int d = static_cast<int>(val(a).cols());
  bool r = rg(a);
  Mat y(n, d);
  auto argmax = std::make_shared<IMat>(n, d);
  const Mat& x = val(a);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      int best = i * group;
      double bv = x(best, c);
      for (int j = 1; j < group; ++j) {
        double v = x(i * group + j, c);
        if (v > bv) {  // strict: ties keep the lowest row
          bv = v;
          best = i * group + j;
        }
      }
      y(i, c) = bv;
      (*argmax)(i, c) = best;
    }
  }
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, argmax](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      Mat& ga = t.grad_ref(a.id);
      for (int i = 0; i < g.rows(); ++i)
        for (int c = 0; c < g.cols(); ++c) ga((*argmax)(i, c), c) += g(i, c);
    };
  return out;
}

Var Tape::group_cols_max(Var a, std::vector<int> offsets) {
  check(a);
  require(offsets.size() >= 2, "group_cols_max: need at least one group");
  require(offsets.front() == 0 && offsets.back() == val(a).cols(),
          "group_cols_max: offsets must span all columns");
  const int n = static_cast<int>(val(a).rows());
  const int c_out = static_cast<int>(offsets.size()) - 1;
  bool r = rg(a);
  Mat y(n, c_out);
  auto argmax = std::make_shared<IMat>(n, c_out);
  const Mat& x = val(a);
  for (int g = 0; g < c_out; ++g) {
    require(offsets[g + 1] > offsets[g], "group_cols_max: empty group");
    for (int i = 0; i < n; ++i) {
      int best = offsets[g];
      double bv = x(i, best);
      for (int j = offsets[g] + 1; j < offsets[g + 1]; ++j) {
        if (x(i, j) > bv) {
          bv = x(i, j);
          best = j;
        }
      }
      y(i, g) = bv;
      (*argmax)(i, g) = best;
    }
  }
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, argmax](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      Mat& ga = t.grad_ref(a.id);
      for (int i = 0; i < g.rows(); ++i)
        for (int c = 0; c < g.cols(); ++c) ga(i, (*argmax)(i, c)) += g(i, c);
    };
  return out;
}

// ---------------------------------------------------------------------------
// normalizations

Var Tape::row_normalize(Var a) {
  check(a);
  const int n = static_cast<int>(val(a).rows());
  bool r = rg(a);
  auto norms = std::make_shared<Vec>(n);
  Mat y = val(a);
  for (int i = 0; i < n; ++i) {
    double nm = val(a).row(i).norm();
    (*norms)(i) = nm;
    if (nm > 0.0)
      y.row(i) /= nm;
    else
      y.row(i).setZero();
  }
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, norms](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& y = t.nodes_[out.id].value;
      Mat& ga = t.grad_ref(a.id);
      for (int i = 0; i < g.rows(); ++i) {
        double nm = (*norms)(i);
        if (nm <= 0.0) continue;  // zero rows: gradient fixed at zero
        double dot = g.row(i).dot(y.row(i));
        ga.row(i) += (g.row(i) - dot * y.row(i)) / nm;
      }
    };
  return out;
}

Var Tape::softmax_rows(Var a) {
  check(a);
  bool r = rg(a);
  Mat y = val(a);
  for (int i = 0; i < y.rows(); ++i) {
    double mx = y.row(i).maxCoeff();
    y.row(i) = (y.row(i).array() - mx).exp();
    y.row(i) /= y.row(i).sum();
  }
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& y = t.nodes_[out.id].value;
      Mat& ga = t.grad_ref(a.id);
      for (int i = 0; i < g.rows(); ++i) {
        double dot = g.row(i).dot(y.row(i));
        ga.row(i) += (g.row(i).array() - dot).matrix().cwiseProduct(y.row(i));
      }
    };
  return out;
}

Var Tape::pairwise_sqdist(Var a) {
  check(a);
  const Mat& x = val(a);
  const int n = static_cast<int>(x.rows());
  Vec sq = x.rowwise().squaredNorm();
  Mat d = (-2.0 * x * x.transpose());
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);  // clamp fp negatives near zero
  d.diagonal().setZero();
  bool r = rg(a);
  Var out = push(std::move(d), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, a, n](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& x = t.val(a);
      // dL/dx_i = 2 * sum_j (g_ij + g_ji) (x_i - x_j)
      Mat h = g + g.transpose();
      Vec rs = h.rowwise().sum();
      t.grad_ref(a.id).noalias() +=
          2.0 * (rs.asDiagonal() * x - h * x);
    };
  return out;
}

// ---------------------------------------------------------------------------
// losses

Var Tape::ce_loss(Var logits, std::vector<int> labels) {
  check(logits);
  const Mat& o = val(logits);
  const int n = static_cast<int>(o.rows());
  const int c = static_cast<int>(o.cols());
  require(static_cast<int>(labels.size()) == n,
          "ce_loss: label count mismatch");
  for (int y : labels) require(y >= 0 && y < c, "ce_loss: label out of range");
  auto probs = std::make_shared<Mat>(n, c);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    double mx = o.row(i).maxCoeff();
    Eigen::RowVectorXd e = (o.row(i).array() - mx).exp();
    double z = e.sum();
    probs->row(i) = e / z;
    loss -= (o(i, labels[i]) - mx) - std::log(z);
  }
  loss /= n;
  bool r = rg(logits);
  Mat y(1, 1);
  y(0, 0) = loss;
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, logits, labels = std::move(labels),
                         probs](Tape& t) {
      const double g = t.nodes_[out.id].grad(0, 0);
      const int n = static_cast<int>(probs->rows());
      Mat d = *probs;
      for (int i = 0; i < n; ++i) d(i, labels[i]) -= 1.0;
      t.grad_ref(logits.id) += (g / n) * d;
    };
  return out;
}

Var Tape::kd_kl(Var student_logits, const Mat& teacher_logits, double t_kl) {
  check(student_logits);
  require(t_kl > 0.0, "kd_kl: temperature must be > 0");
  const Mat& s = val(student_logits);
  check_same_shape(s, teacher_logits, "kd_kl");
  const int n = static_cast<int>(s.rows());

  auto log_softmax = [](const Eigen::RowVectorXd& row) {
    double mx = row.maxCoeff();
    Eigen::RowVectorXd sh = row.array() - mx;
    double lse = std::log(sh.array().exp().sum());
    return Eigen::RowVectorXd(sh.array() - lse);
  };

  auto lp = std::make_shared<Mat>(s.rows(), s.cols());
  auto lq = std::make_shared<Mat>(s.rows(), s.cols());
  auto kl_per_row = std::make_shared<Vec>(n);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    lp->row(i) = log_softmax(s.row(i) / t_kl);
    lq->row(i) = log_softmax(teacher_logits.row(i) / t_kl);
    double kl =
        (lp->row(i).array().exp() * (lp->row(i) - lq->row(i)).array()).sum();
    (*kl_per_row)(i) = kl;
    loss += kl;
  }
  loss /= n;
  bool r = rg(student_logits);
  Mat y(1, 1);
  y(0, 0) = loss;
  Var out = push(std::move(y), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, student_logits, lp, lq, kl_per_row, t_kl,
                         n](Tape& t) {
      const double g = t.nodes_[out.id].grad(0, 0);
      Mat& gs = t.grad_ref(student_logits.id);
      for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd p = lp->row(i).array().exp();
        Eigen::RowVectorXd diff = lp->row(i) - lq->row(i);
        gs.row(i) += (g / (n * t_kl)) *
                     p.cwiseProduct(diff.array() - (*kl_per_row)(i)).matrix();
      }
    };
  return out;
}

// ---------------------------------------------------------------------------
// linear solve for label propagation

Var Tape::solve_propagation(Var S, Var Y, double alpha) {
  check(S);
  check(Y);
  const Mat& s = val(S);
  require(s.rows() == s.cols(), "solve_propagation: S must be square");
  require(val(Y).rows() == s.rows(), "solve_propagation: Y row mismatch");
  require(alpha >= 0.0 && alpha < 1.0,
          "solve_propagation: alpha must be in [0, 1)");
  const int n = static_cast<int>(s.rows());
  Mat a = Mat::Identity(n, n) - alpha * s;
  auto lu = std::make_shared<Eigen::PartialPivLU<Mat>>(a);
  double rcond = lu->rcond();
  require(std::isfinite(rcond) && rcond > 1e-14,
          "solve_propagation: system near-singular (rcond=" +
              std::to_string(rcond) + ")");
  Mat z = lu->solve(val(Y));
  bool r = rg(S) || rg(Y);
  Var out = push(std::move(z), r, nullptr);
  if (r)
    nodes_[out.id].bp = [out, S, Y, alpha, lu](Tape& t) {
      const Mat& g = t.nodes_[out.id].grad;
      const Mat& z = t.nodes_[out.id].value;
      // (I - alpha S)^T X = G; dY = X; dS = alpha * X * Z^T
      Mat x = lu->transpose().solve(g);
      if (t.rg(Y)) t.grad_ref(Y.id) += x;
      if (t.rg(S)) t.grad_ref(S.id).noalias() += alpha * x * z.transpose();
    };
  return out;
}

// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
  check(loss);
  require(!backward_done_, "Tape: backward already ran");
  require(val(loss).rows() == 1 && val(loss).cols() == 1,
          "Tape: backward needs a scalar loss");
  backward_done_ = true;
  grad_ref(loss.id)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.bp && n.grad.size() > 0) n.bp(*this);
  }
  for (auto& [id, p] : bindings_) {
    if (nodes_[id].grad.size() > 0) p->grad += nodes_[id].grad;
  }
}

}  // namespace pcfss::ad

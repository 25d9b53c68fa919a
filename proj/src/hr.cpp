#include "pcfss/hr.hpp"

#include <cmath>

namespace pcfss {

using ad::Tape;
using ad::Var;

LossReport total_objective(double ce, double ce_o, double kl,
                           double lambda_kl, double t_kl) {
  require(std::isfinite(ce) && std::isfinite(ce_o) && std::isfinite(kl),
          "total_objective: non-finite component");
  LossReport r;
  r.ce = ce;
  r.ce_o = ce_o;
  r.kl = kl;
  r.lambda_kl = lambda_kl;
  r.t_kl = t_kl;
  r.total = ce + ce_o + lambda_kl * kl;
  return r;
}

PrototypeSet teacher_prototypes(const Mat& f_q, const std::vector<int>& y_q,
                                int n_way, bool multi, int m, int start) {
  require(static_cast<int>(y_q.size()) == f_q.rows(),
          "teacher_prototypes: label length mismatch");
  PrototypeSet ps;
  ps.n_way = n_way;
  ps.source = PrototypeSet::Source::Query;
  for (int cat = 0; cat <= n_way; ++cat) {
    std::vector<int> mask(y_q.size());
    int count = 0;
    for (size_t i = 0; i < y_q.size(); ++i) {
      mask[i] = (y_q[i] == cat) ? 1 : 0;
      count += mask[i];
    }
    if (count == 0) {
      ps.protos.push_back(Mat::Zero(1, f_q.cols()));
      ps.degenerate.push_back(1);
      continue;
    }
    if (multi) {
      auto r = multi_prototype_generate(f_q, mask, m, start,
                                        "teacher category " +
                                            std::to_string(cat));
      ps.protos.push_back(std::move(r.prototypes));
    } else {
      Mat p(1, f_q.cols());
      Vec acc = Vec::Zero(f_q.cols());
      for (size_t i = 0; i < y_q.size(); ++i)
        if (mask[i]) acc += f_q.row(static_cast<int>(i)).transpose();
      p.row(0) = (acc / count).transpose();
      ps.protos.push_back(std::move(p));
    }
    ps.degenerate.push_back(0);
  }
  return ps;
}

double kd_kl_loss(const Mat& o_s, const Mat& o_q, double t_kl) {
  require(t_kl > 0.0, "kd_kl_loss: temperature must be > 0");
  require(o_s.rows() == o_q.rows() && o_s.cols() == o_q.cols(),
          "kd_kl_loss: shape mismatch");
  auto log_softmax = [](Eigen::RowVectorXd row) {
    double mx = row.maxCoeff();
    row.array() -= mx;
    double lse = std::log(row.array().exp().sum());
    row.array() -= lse;
    return row;
  };
  double loss = 0.0;
  for (int i = 0; i < o_s.rows(); ++i) {
    Eigen::RowVectorXd lp = log_softmax(o_s.row(i) / t_kl);
    Eigen::RowVectorXd lq = log_softmax(o_q.row(i) / t_kl);
    loss += (lp.array().exp() * (lp - lq).array()).sum();
  }
  return loss / o_s.rows();
}

double proto_align_loss(const Mat& p_s, const Mat& p_q, bool squared) {
  require(p_s.rows() == p_q.rows() && p_s.cols() == p_q.cols(),
          "proto_align_loss: prototype shape mismatch");
  Mat d = p_s - p_q;
  return squared ? d.array().square().mean() : d.array().abs().mean();
}

TeacherBundle teacher_forward(Tape& t, Var f_q, const std::vector<int>& y_q,
                              int n_way, bool multi, int m,
                              const PredictorConfig& cfg) {
  const Mat& f = t.val(f_q);
  const int n = static_cast<int>(f.rows());
  require(static_cast<int>(y_q.size()) == n,
          "teacher_forward: label length mismatch");

  TeacherBundle out;
  for (int cat = 0; cat <= n_way; ++cat) {
    std::vector<int> mask(y_q.size());
    int count = 0;
    for (size_t i = 0; i < y_q.size(); ++i) {
      mask[i] = (y_q[i] == cat) ? 1 : 0;
      count += mask[i];
    }
    if (count == 0) {
      out.protos.protos.push_back(t.leaf(Mat::Zero(1, f.cols())));
      out.protos.degenerate.push_back(1);
      out.degenerate = true;
      continue;
    }
    Mat pool;
    if (multi) {
      auto r = multi_prototype_generate(
          f, mask, m, 0, "teacher category " + std::to_string(cat));
      pool = assignment_pooling(n, r.assignment);
    } else {
      pool = mask_pooling_row(mask, 1);
    }
    out.protos.protos.push_back(t.matmul(t.leaf(std::move(pool)), f_q));
    out.protos.degenerate.push_back(0);
  }
  out.o_q = predict_logits(t, out.protos, f_q, cfg);
  return out;
}

Var hr_kl(Tape& t, Var o_s, const TeacherBundle& teacher, double t_kl) {
  if (teacher.degenerate) return t.leaf(Mat::Zero(1, 1));
  return t.kd_kl(o_s, t.val(teacher.o_q), t_kl);
}

}  // namespace pcfss

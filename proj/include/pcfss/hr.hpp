#pragma once

#include <vector>

#include "pcfss/predictor.hpp"
#include "pcfss/prototypes.hpp"

namespace pcfss {

struct HrConfig {
  bool enabled = false;
  enum class Mode { Kl, L1, L2 };
  Mode mode = Mode::Kl;
  double t_kl = 1.0;
  double lambda_kl = 1.0;
};

struct LossReport {
  double ce = 0.0;
  double ce_o = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double lambda_kl = 1.0;
  double t_kl = 1.0;
};

// total = ce + ce_o + lambda_kl * kl
LossReport total_objective(double ce, double ce_o, double kl,
                           double lambda_kl, double t_kl = 1.0);

// Query-derived prototypes from ground truth: the single mode mask-pools each
// category, the multi mode runs the FPS pipeline with m seeds. An absent
// category yields a zero prototype plus its degeneracy flag.
PrototypeSet teacher_prototypes(const Mat& f_q, const std::vector<int>& y_q,
                                int n_way, bool multi, int m, int start = 0);

// mean over rows of KL(softmax(o_s/t) || softmax(o_q/t)); teacher constant
double kd_kl_loss(const Mat& o_s, const Mat& o_q, double t_kl);
// L1/L2 ablations: mean absolute / mean squared difference of prototypes
double proto_align_loss(const Mat& p_s, const Mat& p_q, bool squared);

// Tape-side teacher path. Prototypes pool the query feature Var through
// constant weights derived from ground truth, so the teacher's cross-entropy
// still trains the extractor while the KL term sees the teacher as constant.
struct TeacherBundle {
  ProtoVars protos;
  ad::Var o_q;  // teacher logits (n x c)
  bool degenerate = false;
};

TeacherBundle teacher_forward(ad::Tape& t, ad::Var f_q,
                              const std::vector<int>& y_q, int n_way,
                              bool multi, int m, const PredictorConfig& cfg);

// KL against the detached teacher logits; returns a zero-valued constant when
// the teacher is degenerate.
ad::Var hr_kl(ad::Tape& t, ad::Var o_s, const TeacherBundle& teacher,
              double t_kl);

}  // namespace pcfss

#pragma once

#include <string>

#include "pcfss/autodiff.hpp"
#include "pcfss/neural.hpp"
#include "pcfss/params.hpp"

namespace pcfss {

struct BpaConfig {
  bool enabled = false;
  // component switches: a disabled stage is replaced by its pass-through
  bool use_c1 = true;  // off: r_q = p_s_bg
  bool use_g = true;   // off: r = r_q
  bool use_r = true;   // off: p_as_bg = r
  enum class Filter { Gate, Subtract, Projector };
  Filter filter = Filter::Gate;
  enum class Corr { Paper, NoFg, Mlp };
  Corr corr = Corr::Paper;
  bool apply_fg = false;  // ablation: run the same adaptation on fg prototypes
};

// Background Prototype Adaptation. One AttentionParams instance backs the
// inclusive correlation, the exclusive correlation and the rectification
// site, so the three share weights by construction; the gate MLP is separate.
struct BpaModule {
  AttentionParams attn;
  Mlp gate;       // d -> d -> d, sigmoid applied in the filter formula
  Mlp projector;  // 2d -> d -> d (Filter::Projector)
  Mlp corr_mlp;   // 3d -> d -> d (Corr::Mlp)
  int dim = 0;

  static BpaModule create(ParamStore& store, const std::string& prefix,
                          int dim);

  // full pipeline on the background prototypes; fg prototypes are only read
  ad::Var adapt(ad::Tape& t, ParamStore& store, ad::Var p_bg, ad::Var p_fg,
                ad::Var f_q, const BpaConfig& cfg) const;
};

// Individual stages, exposed for tests and ablations.
ad::Var inclusive_correlation(ad::Tape& t, ParamStore& store,
                              const AttentionParams& attn, ad::Var p_bg,
                              ad::Var f_q);
ad::Var exclusive_correlation(ad::Tape& t, ParamStore& store,
                              const AttentionParams& attn, ad::Var p_bg,
                              ad::Var p_fg);
ad::Var fg_filter(ad::Tape& t, ParamStore& store, const BpaModule& m,
                  ad::Var r_q, ad::Var r_s, BpaConfig::Filter mode);
ad::Var rectify(ad::Tape& t, ParamStore& store, const AttentionParams& attn,
                ad::Var p_bg, ad::Var r);

}  // namespace pcfss

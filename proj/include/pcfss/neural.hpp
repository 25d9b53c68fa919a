#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pcfss/autodiff.hpp"
#include "pcfss/geometry.hpp"
#include "pcfss/params.hpp"

namespace pcfss {

// Stack of affine layers with ReLU between them; the final layer is affine
// unless final_relu is requested. widths lists all dims, e.g. {6, 32, 32}.
struct Mlp {
  std::string prefix;
  std::vector<int> widths;

  static Mlp create(ParamStore& store, const std::string& prefix,
                    std::vector<int> widths, int group = kGroupRest);
  ad::Var forward(ad::Tape& t, ParamStore& store, ad::Var x,
                  bool final_relu = false) const;
};

// Free-function form of the MLP forward for ad-hoc parameter stores.
ad::Var mlp_forward(ad::Tape& t, ParamStore& store, ad::Var x,
                    const std::string& prefix, const std::vector<int>& widths,
                    bool final_relu = false);

// Query/key/value projections (each d x d). One instance may back several
// attention sites; they then share the underlying parameter tensors.
struct AttentionParams {
  std::string prefix;
  int dim = 0;

  static AttentionParams create(ParamStore& store, const std::string& prefix,
                                int dim, int group = kGroupRest);
};

// softmax(Q K^T / sqrt(d)) V with no residual path.
ad::Var cross_attention_forward(ad::Tape& t, ParamStore& store,
                                const AttentionParams& p, ad::Var q_in,
                                ad::Var kv_in);

// f + attention(f, f): the AttMPTI-style extractor head.
ad::Var self_attention_forward(ad::Tape& t, ParamStore& store,
                               const AttentionParams& p, ad::Var f);

// max over neighbors j of mlp([f_i ; f_j - f_i])
ad::Var edgeconv_forward(ad::Tape& t, ParamStore& store, const Mlp& edge_mlp,
                         ad::Var f, const NeighborIndex& neighbors);

struct ExtractorConfig {
  std::vector<int> widths{32, 32, 64};
  int k = 10;
  int out_dim = 64;
  enum class Head { LinearProjector, SelfAttention };
  Head head = Head::LinearProjector;

  void validate() const;
};

// Reduced-width DGCNN: stacked EdgeConv layers over a dynamically recomputed
// feature-space kNN graph, skip concatenation, then the configured head.
struct Extractor {
  ExtractorConfig cfg;
  std::vector<Mlp> edge_mlps;
  Mlp head_proj;
  AttentionParams head_attn;  // used only for the SelfAttention head

  static Extractor create(ParamStore& store, const std::string& prefix,
                          const ExtractorConfig& cfg);
  ad::Var forward(ad::Tape& t, ParamStore& store, const Mat& coords) const;
};

// Central finite-difference check of tape gradients for every parameter in
// the store against the scalar loss produced by build_loss.
struct GradCheckReport {
  double max_rel_err = 0.0;
  bool finite = true;
  std::string worst_param;
  int worst_entry = -1;

  bool pass(double tol) const { return finite && max_rel_err <= tol; }
};

GradCheckReport grad_check(ParamStore& store,
                           const std::function<ad::Var(ad::Tape&)>& build_loss,
                           double eps = 1e-5);

}  // namespace pcfss

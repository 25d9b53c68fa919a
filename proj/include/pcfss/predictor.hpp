#pragma once

#include <vector>

#include "pcfss/autodiff.hpp"
#include "pcfss/prototypes.hpp"

namespace pcfss {

struct PredictorConfig {
  enum class Kind { Proto, Mpti };
  Kind kind = Kind::Proto;
  double t = 15.0;        // cosine temperature
  double alpha = 0.99;    // propagation mixing coefficient
  int graph_k = 20;       // kNN graph degree
  double bandwidth = 0;   // <= 0: median pairwise distance of the node set
};

// --- cosine path ------------------------------------------------------------

// score(i, c) = t * max over class-c prototypes of cosine(f_i, p); zero-norm
// rows on either side contribute score 0.
Mat cosine_predict(const Mat& f_q, const PrototypeSet& ps, double t);

// --- label propagation path --------------------------------------------------

struct PropagationGraph {
  Mat S;             // symmetric-normalized affinity, zero diagonal
  Mat Y;             // (n+P) x c label matrix; prototype rows one-hot
  double alpha = 0.99;
  double bandwidth = 1.0;
  int k = 20;
};

// Gaussian kernel on a directed kNN mask symmetrized by union, diagonal
// zeroed, then S = D^{-1/2} W D^{-1/2}. Y is left for the caller to fill.
PropagationGraph build_knn_graph(const Mat& nodes, int k, double bandwidth);

// label matrix: query rows (first n) zero, prototype rows one-hot by category
Mat propagation_labels(int n_query, const std::vector<int>& proto_category,
                       int n_categories);

Mat propagate_closed_form(const PropagationGraph& g);
// Z_{t+1} = alpha S Z_t + (1-alpha) Y starting from Z_0 = Y. The fixed point
// is (1-alpha) times the closed form, so comparisons divide by (1-alpha).
Mat propagate_iterative(const PropagationGraph& g, int steps);
Mat logits_from_propagation(const Mat& z, int n_query);

double median_pairwise_distance(const Mat& nodes);

// --- tape-level prediction (shared by the main and teacher paths) -----------

struct ProtoVars {
  std::vector<ad::Var> protos;  // [0]=bg, [1..N]=fg classes
  std::vector<char> degenerate;
};

ad::Var predict_logits(ad::Tape& t, const ProtoVars& ps, ad::Var f_q,
                       const PredictorConfig& cfg);

}  // namespace pcfss

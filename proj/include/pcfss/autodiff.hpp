#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pcfss/common.hpp"
#include "pcfss/params.hpp"

namespace pcfss::ad {

// Handle into a Tape node.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense double matrices. One tape instance carries one
// forward pass; backward() runs the recorded closures in reverse creation
// order. Scalars are represented as 1x1 matrices. Ops only record a backward
// closure when some input requires gradients, so inference passes pay no
// bookkeeping cost.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Mat value, bool requires_grad = false);
  // Leaf backed by a stored parameter; after backward() the node gradient is
  // accumulated into p.grad.
  Var leaf_param(Param& p);

  const Mat& val(Var v) const;
  const Mat& grad(Var v) const;  // zero-sized until backward touches it

  // elementwise
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var affine(Var a, double mul, double add);  // mul*a + add
  Var relu(Var a);
  Var sigmoid(Var a);
  Var cwise_exp(Var a);
  Var cwise_abs(Var a);
  Var mask(Var a, const Mat& m01);  // elementwise product with a constant
  Var rsqrt(Var a, double eps);     // 1/sqrt(a + eps)

  // linear algebra
  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var add_row_bias(Var x, Var bias_1xd);
  Var scale_rows(Var x, Var v_nx1);
  Var scale_cols(Var x, Var v_nx1);

  // shape ops
  Var concat_cols(Var a, Var b);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int count);
  Var gather_rows(Var a, std::vector<int> idx);
  Var repeat_row(Var row_1xd, int n);

  // reductions
  Var row_sum(Var a);    // n x d -> n x 1
  Var row_mean(Var a);   // n x d -> 1 x d (mean over rows)
  Var sum_all(Var a);    // 1 x 1
  Var mean_all(Var a);   // 1 x 1
  Var group_rows_max(Var a, int group);  // (n*g) x d -> n x d
  // column groups [offsets[i], offsets[i+1]) -> one output column each
  Var group_cols_max(Var a, std::vector<int> offsets);

  // rows scaled to unit L2 norm; zero rows stay zero
  Var row_normalize(Var a);
  Var softmax_rows(Var a);
  // pairwise squared distances of rows of a (n x d -> n x n)
  Var pairwise_sqdist(Var a);

  // losses
  Var ce_loss(Var logits, std::vector<int> labels);
  // mean_i KL(softmax(student_i/t) || softmax(teacher_i/t)); teacher constant
  Var kd_kl(Var student_logits, const Mat& teacher_logits, double t);

  // Z = (I - alpha*S)^{-1} Y, differentiable through S and Y
  Var solve_propagation(Var S, Var Y, double alpha);

  void backward(Var loss);
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&)> bp;
  };

  Var push(Mat value, bool requires_grad, std::function<void(Tape&)> bp);
  Mat& grad_ref(int id);  // allocates zeros on first touch
  bool rg(Var v) const { return nodes_[v.id].requires_grad; }
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param*>> bindings_;
  bool backward_done_ = false;
};

}  // namespace pcfss::ad

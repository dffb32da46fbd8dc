#ifndef PROBEKIT_AUTODIFF_HPP
#define PROBEKIT_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "probekit/matrix.hpp"

namespace probekit::ad {

using VarId = std::int32_t;

// Small tape-based reverse-mode graph over Matrix values. One graph is built
// per training example and discarded after backward(); nodes are appended in
// evaluation order, so reverse id order is a valid topological order.
class Graph {
 public:
  VarId constant(Matrix value);
  VarId param(Matrix value);

  const Matrix& value(VarId id) const { return nodes_[id].value; }
  const Matrix& grad(VarId id) const { return nodes_[id].grad; }
  bool needs_grad(VarId id) const { return nodes_[id].needs_grad; }

  VarId matmul(VarId a, VarId b);
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);  // elementwise
  VarId scale(VarId a, double c);
  VarId relu(VarId a);
  VarId softplus(VarId a);

  // Per-column layer norm; gamma and beta are d x 1.
  VarId layer_norm_cols(VarId x, VarId gamma, VarId beta, double eps);

  VarId mean_row(VarId a);                  // 1 x n -> 1 x 1
  VarId sum_all(VarId a);                   // any  -> 1 x 1
  VarId max_rows(VarId a);                  // p x n -> p x 1, ties to lowest column
  VarId min_rows(VarId a);                  // p x n -> p x 1, ties to lowest column
  VarId concat_rows(VarId a, VarId b);      // (p x 1, q x 1) -> (p+q) x 1
  VarId dot(VarId a, VarId b);              // same shape -> 1 x 1

  // Per-head softmax-weighted mean: scores/values H x n -> H x 1.
  VarId softmax_mean_heads(VarId scores, VarId values);

  // Per-head max over sliding-window softmax means (width w, truncated at the
  // start of the sequence): H x n -> H x 1. Subgradient flows through the
  // argmax window only, ties to the earliest window.
  VarId rolling_max_mean_heads(VarId scores, VarId values, std::size_t window);

  // max_j EMA_j with EMA_0 = 0, EMA_j = alpha*s_j + (1-alpha)*EMA_{j-1}.
  VarId ema_max_row(VarId scores, double alpha);

  VarId bce_logit(VarId z, int label);      // 1 x 1 logit -> 1 x 1 loss
  VarId l1_norm(VarId a);                   // sum |a_ij| -> 1 x 1
  VarId ortho_penalty(VarId w);             // ||W^T W - I||_F^2 -> 1 x 1

  // Seeds d(loss)/d(loss) = 1 and propagates to every param node.
  void backward(VarId loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Graph&, const Matrix&)> backprop;  // receives this node's grad
    bool needs_grad = false;
  };

  VarId push(Matrix value, bool needs_grad,
             std::function<void(Graph&, const Matrix&)> backprop);
  Matrix& grad_buffer(VarId id);
  void accumulate(VarId id, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace probekit::ad

#endif  // PROBEKIT_AUTODIFF_HPP

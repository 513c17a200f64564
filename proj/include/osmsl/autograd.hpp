#pragma once

// Minimal reverse-mode differentiation over dense double matrices. Each
// operation records a node holding its value, its parents and a closure that
// pushes the node's gradient to the parents. backward() walks the graph in
// reverse topological order.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace osmsl::ad {

using Matrix = Eigen::MatrixXd;

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Matrix value;
  Matrix grad;  // empty until the first accumulate()
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  double scalar() const { return value(0, 0); }

  void accumulate(const Matrix& g);
  void zero_grad() { grad.resize(0, 0); }
  /// Gradient or zeros when nothing was accumulated.
  Matrix grad_or_zero() const;
};

/// Disables graph construction on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);

/// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
void backward(const Var& root);

// Arithmetic
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
/// a (n x d) + row (1 x d) broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a (n x d) with row i multiplied by col(i) (n x 1).
Var mul_col(const Var& a, const Var& col);
Var relu(const Var& a);

// Shape
Var concat_cols(std::span<const Var> parts);
Var vstack(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::vector<int> indices);
Var mean_rows(const Var& a);  // 1 x d
Var sum_all(const Var& a);    // 1 x 1

// Row-wise reductions and normalizations
Var softmax_rows(const Var& a);
/// Cosine similarity of matching rows, n x 1; 0 when either row is zero.
Var row_cosine(const Var& a, const Var& b);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);

// Losses (mean over rows)
/// targets hold class indices, one per row of logits.
Var softmax_cross_entropy(const Var& logits, std::span<const int> targets);
/// logits n x 1, targets in {0,1}.
Var bce_with_logits(const Var& logits, std::span<const double> targets);

/// Creates a node with custom backward; the closure receives the finished node.
Var make_node(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

}  // namespace osmsl::ad

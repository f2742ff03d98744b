#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Tape records every intermediate matrix together with the adjoint rule of
// the primitive that produced it. Nodes are appended in evaluation order, so
// the node index is a topological order and backward() can sweep it in
// reverse exactly once. Scalars are 1x1 matrices.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace gpcde::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives gradients.
  Var constant(Matrix value);
  Var constant(double value);
  /// A differentiable input. `name` is used in diagnostics only.
  Var leaf(Matrix value, std::string name);

  /// Record the result of a primitive. `parents` are the nodes the adjoint
  /// rule will write to; if none of them needs a gradient the rule is dropped.
  /// Throws NumericalError when `value` contains NaN or Inf.
  Var push(Matrix value, std::string_view op, std::vector<int> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

  /// Add `g` to the adjoint of node `id` (no-op for constants).
  void accumulate(int id, const Matrix& g);

  /// Seed d(target)/d(target) = 1 and propagate to every leaf.
  /// Throws DimensionError if target is not 1x1.
  void backward(Var target);

  /// Adjoint of a node after backward(); zeros if it was never reached.
  Matrix grad(Var v) const;

  size_t size() const { return nodes_.size(); }
  std::string_view op_name(int id) const { return nodes_[static_cast<size_t>(id)].op; }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;  // empty until first accumulation
    std::string op;
    Backward backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise with broadcasting ----------------------------------------
// Binary elementwise ops accept equal shapes, a 1x1 operand, a 1xC row
// against RxC, or an Rx1 column against RxC.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var tanh(Var a);
/// max(a, floor) elementwise; the gradient is zero where the floor is active.
Var clamp_min(Var a, double floor);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);

// ---- reductions and structure ---------------------------------------------

Var sum(Var a);
/// Rx1 vector of row sums.
Var rowsum(Var a);
/// 1xC vector of column sums.
Var colsum(Var a);
/// Diagonal of a square matrix as an Nx1 column.
Var diag(Var a);
Var transpose(Var a);
Var matmul(Var a, Var b);
Var hcat(const std::vector<Var>& parts);
/// Columns [start, start + count).
Var cols(Var a, Eigen::Index start, Eigen::Index count);
/// Row i of the result is row index[i] of `a`; repeated indices accumulate.
Var gather_rows(Var a, const std::vector<int>& index);
/// Column-major reshape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// 1xC vector of log(sum(exp(column))) computed with max-shift.
Var logsumexp_cols(Var a);

// ---- linear algebra -------------------------------------------------------

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Throws NumericalError if factorization fails. The adjoint is symmetric.
Var cholesky(Var a);
/// L^{-1} B for lower-triangular L.
Var solve_lower(Var lower, Var rhs);
/// L^{-T} B for lower-triangular L.
Var solve_lower_transposed(Var lower, Var rhs);

// ---- kernel helpers -------------------------------------------------------

/// Pairwise squared Euclidean distances between rows of a (N1xD) and b (N2xD).
Var sqdist(Var a, Var b);
/// Matern-5/2 correlation as a function of squared distance (unit lengthscale).
Var matern52_from_sqdist(Var d2);
/// Lower triangle of `raw` with the diagonal mapped through exp; upper part zero.
Var lower_tri_exp_diag(Var raw);

}  // namespace gpcde::ad

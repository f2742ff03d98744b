#include "gpcde/autodiff.hpp"

#include "gpcde/error.hpp"

#include <cmath>
#include <sstream>

namespace gpcde::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("scalar() on a non-scalar node");
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), "constant", {}, nullptr); }

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::leaf(Matrix value, std::string name) {
  if (!value.allFinite()) {
    throw NumericalError("non-finite value in leaf '" + name + "'");
  }
  Node node;
  node.value = std::move(value);
  node.op = "leaf:" + std::move(name);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Matrix value, std::string_view op, std::vector<int> parents, Backward backward) {
  if (!value.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite value produced by '" << op << "' (node " << nodes_.size() << ")";
    throw NumericalError(msg.str());
  }
  Node node;
  node.value = std::move(value);
  node.op = std::string(op);
  for (int p : parents) {
    if (nodes_[static_cast<size_t>(p)].needs_grad) {
      node.needs_grad = true;
      break;
    }
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& node = nodes_[static_cast<size_t>(id)];
  if (!node.needs_grad) return;
  if (node.adjoint.size() == 0) {
    node.adjoint = g;
  } else {
    node.adjoint += g;
  }
}

void Tape::backward(Var target) {
  if (target.tape() != this) throw Error("backward() on a node of another tape");
  const Matrix& tv = value(target.id());
  if (tv.rows() != 1 || tv.cols() != 1) {
    throw DimensionError("backward() target must be a scalar node");
  }
  for (Node& n : nodes_) n.adjoint.resize(0, 0);
  nodes_[static_cast<size_t>(target.id())].adjoint = Matrix::Ones(1, 1);
  for (int id = target.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.adjoint.size() == 0 || !n.backward) continue;
    n.backward(*this, n.adjoint);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id())];
  if (n.adjoint.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("operation on an empty Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw Error("operands live on different tapes");
  return t;
}

struct Shape {
  Eigen::Index rows;
  Eigen::Index cols;
};

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw DimensionError(std::string("incompatible shapes for broadcast in '") + op + "'");
}

Shape broadcast_shape(const Matrix& a, const Matrix& b, const char* op) {
  return {broadcast_dim(a.rows(), b.rows(), op), broadcast_dim(a.cols(), b.cols(), op)};
}

Matrix expand(const Matrix& m, Shape s) {
  if (m.rows() == s.rows && m.cols() == s.cols) return m;
  return m.replicate(s.rows / m.rows(), s.cols / m.cols());
}

// Sum a broadcast adjoint back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix r = g;
  if (rows == 1 && r.rows() != 1) r = r.colwise().sum().eval();
  if (cols == 1 && r.cols() != 1) r = r.rowwise().sum().eval();
  return r;
}

template <typename Forward, typename GradA, typename GradB>
Var binary(Var a, Var b, const char* op, Forward fwd, GradA ga, GradB gb) {
  Tape& t = tape_of(a, b);
  const Shape s = broadcast_shape(a.value(), b.value(), op);
  const int ia = a.id(), ib = b.id();
  Matrix value = fwd(expand(a.value(), s), expand(b.value(), s));
  return t.push(std::move(value), op, {ia, ib}, [ia, ib, s, ga, gb](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(ia);
    const Matrix& bv = tp.value(ib);
    if (tp.needs_grad(ia)) {
      tp.accumulate(ia, reduce_to(ga(g, expand(av, s), expand(bv, s)), av.rows(), av.cols()));
    }
    if (tp.needs_grad(ib)) {
      tp.accumulate(ib, reduce_to(gb(g, expand(av, s), expand(bv, s)), bv.rows(), bv.cols()));
    }
  });
}

template <typename Forward, typename Grad>
Var unary(Var a, const char* op, Forward fwd, Grad grad) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix value = fwd(a.value());
  const int out = static_cast<int>(t.size());
  return t.push(std::move(value), op, {ia}, [ia, out, grad](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, grad(g, tp.value(ia), tp.value(out)));
  });
}

Matrix lower_strict(const Matrix& m) {
  Matrix r = m.triangularView<Eigen::StrictlyLower>();
  return r;
}

Matrix lower(const Matrix& m) {
  Matrix r = m.triangularView<Eigen::Lower>();
  return r;
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul",
      [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div",
      [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return -(g.array() * x.array() / y.array().square()).matrix();
      });
}

Var neg(Var a) {
  return unary(
      a, "neg", [](const Matrix& x) -> Matrix { return -x; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& v) -> Matrix { return g.cwiseProduct(v); });
}

Var log(Var a) {
  return unary(
      a, "log", [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseQuotient(x); });
}

Var square(Var a) {
  return unary(
      a, "square", [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (2.0 * g.array() * x.array()).matrix();
      });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& v) -> Matrix {
        return (g.array() * (1.0 - v.array().square())).matrix();
      });
}

Var clamp_min(Var a, double floor) {
  return unary(
      a, "clamp_min", [floor](const Matrix& x) -> Matrix { return x.cwiseMax(floor); },
      [floor](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > floor).select(g, 0.0).matrix();
      });
}

Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }
Var operator/(Var a, Var b) { return div(a, b); }
Var operator-(Var a) { return neg(a); }
Var operator+(Var a, double b) { return add(a, tape_of(a).constant(b)); }
Var operator+(double a, Var b) { return add(tape_of(b).constant(a), b); }
Var operator-(Var a, double b) { return sub(a, tape_of(a).constant(b)); }
Var operator-(double a, Var b) { return sub(tape_of(b).constant(a), b); }
Var operator*(Var a, double b) { return mul(a, tape_of(a).constant(b)); }
Var operator*(double a, Var b) { return mul(tape_of(b).constant(a), b); }
Var operator/(Var a, double b) { return mul(a, tape_of(a).constant(1.0 / b)); }

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), "sum", {ia},
                [ia](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.value(ia);
                  tp.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
                });
}

Var rowsum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value().rowwise().sum(), "rowsum", {ia}, [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.replicate(1, tp.value(ia).cols()));
  });
}

Var colsum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value().colwise().sum(), "colsum", {ia}, [ia](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, g.replicate(tp.value(ia).rows(), 1));
  });
}

Var diag(Var a) {
  Tape& t = tape_of(a);
  if (a.rows() != a.cols()) throw DimensionError("diag() of a non-square matrix");
  const int ia = a.id();
  return t.push(a.value().diagonal(), "diag", {ia}, [ia](Tape& tp, const Matrix& g) {
    const Eigen::Index n = tp.value(ia).rows();
    Matrix d = Matrix::Zero(n, n);
    d.diagonal() = g.col(0);
    tp.accumulate(ia, d);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.push(a.value().transpose(), "transpose", {ia},
                [ia](Tape& tp, const Matrix& g) { tp.accumulate(ia, g.transpose()); });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), "matmul", {ia, ib}, [ia, ib](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("hcat of nothing");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index total = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("operands live on different tapes");
    if (p.rows() != rows) throw DimensionError("hcat: row counts differ");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Matrix value(rows, total);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    value.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return t.push(std::move(value), "hcat", ids, [ids, widths](Tape& tp, const Matrix& g) {
    Eigen::Index off = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (tp.needs_grad(ids[i])) tp.accumulate(ids[i], g.middleCols(off, widths[i]));
      off += widths[i];
    }
  });
}

Var cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("cols: column range out of bounds");
  }
  const int ia = a.id();
  return t.push(a.value().middleCols(start, count), "cols", {ia},
                [ia, start, count](Tape& tp, const Matrix& g) {
                  const Matrix& x = tp.value(ia);
                  Matrix full = Matrix::Zero(x.rows(), x.cols());
                  full.middleCols(start, count) = g;
                  tp.accumulate(ia, full);
                });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix value(static_cast<Eigen::Index>(index.size()), x.cols());
  for (size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) throw DimensionError("gather_rows: index out of range");
    value.row(static_cast<Eigen::Index>(i)) = x.row(index[i]);
  }
  const int ia = a.id();
  return t.push(std::move(value), "gather_rows", {ia}, [ia, index](Tape& tp, const Matrix& g) {
    const Matrix& src = tp.value(ia);
    Matrix full = Matrix::Zero(src.rows(), src.cols());
    for (size_t i = 0; i < index.size(); ++i) full.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    tp.accumulate(ia, full);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.value().size()) throw DimensionError("reshape: element count differs");
  const int ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  Matrix value = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return t.push(std::move(value), "reshape", {ia}, [ia, r0, c0](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

Var logsumexp_cols(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix value(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).maxCoeff();
    value(0, c) = m + std::log((x.col(c).array() - m).exp().sum());
  }
  const int ia = a.id();
  const int out = static_cast<int>(t.size());
  return t.push(std::move(value), "logsumexp_cols", {ia}, [ia, out](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(ia);
    const Matrix& lse = tp.value(out);
    Matrix d(xv.rows(), xv.cols());
    for (Eigen::Index c = 0; c < xv.cols(); ++c) {
      d.col(c) = g(0, c) * (xv.col(c).array() - lse(0, c)).exp().matrix();
    }
    tp.accumulate(ia, d);
  });
}

Var cholesky(Var a) {
  Tape& t = tape_of(a);
  if (a.rows() != a.cols()) throw DimensionError("cholesky of a non-square matrix");
  Eigen::LLT<Matrix> llt(a.value());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("cholesky: matrix is not positive definite (node " +
                         std::to_string(a.id()) + ")");
  }
  Matrix chol = llt.matrixL();
  const int ia = a.id();
  const int out = static_cast<int>(t.size());
  return t.push(std::move(chol), "cholesky", {ia}, [ia, out](Tape& tp, const Matrix& g) {
    const Matrix& l = tp.value(out);
    // phi(L^T Lbar): lower triangle with halved diagonal.
    Matrix p = lower(l.transpose() * lower(g));
    p.diagonal() *= 0.5;
    const auto tri = l.triangularView<Eigen::Lower>();
    // L^{-T} P L^{-1}
    Matrix left = tri.transpose().solve(p);
    Matrix x = tri.transpose().solve(left.transpose()).transpose();
    tp.accumulate(ia, 0.5 * (x + x.transpose()));
  });
}

Var solve_lower(Var lower_factor, Var rhs) {
  Tape& t = tape_of(lower_factor, rhs);
  if (lower_factor.rows() != lower_factor.cols() || lower_factor.cols() != rhs.rows()) {
    throw DimensionError("solve_lower: shape mismatch");
  }
  const int il = lower_factor.id(), ib = rhs.id();
  Matrix x = lower_factor.value().triangularView<Eigen::Lower>().solve(rhs.value());
  const int out = static_cast<int>(t.size());
  return t.push(std::move(x), "solve_lower", {il, ib}, [il, ib, out](Tape& tp, const Matrix& g) {
    const auto tri = tp.value(il).triangularView<Eigen::Lower>();
    Matrix bbar = tri.transpose().solve(g);
    if (tp.needs_grad(il)) tp.accumulate(il, -lower(bbar * tp.value(out).transpose()));
    if (tp.needs_grad(ib)) tp.accumulate(ib, bbar);
  });
}

Var solve_lower_transposed(Var lower_factor, Var rhs) {
  Tape& t = tape_of(lower_factor, rhs);
  if (lower_factor.rows() != lower_factor.cols() || lower_factor.cols() != rhs.rows()) {
    throw DimensionError("solve_lower_transposed: shape mismatch");
  }
  const int il = lower_factor.id(), ib = rhs.id();
  Matrix x = lower_factor.value().triangularView<Eigen::Lower>().transpose().solve(rhs.value());
  const int out = static_cast<int>(t.size());
  return t.push(std::move(x), "solve_lower_transposed", {il, ib},
                [il, ib, out](Tape& tp, const Matrix& g) {
                  const auto tri = tp.value(il).triangularView<Eigen::Lower>();
                  Matrix bbar = tri.solve(g);
                  if (tp.needs_grad(il)) tp.accumulate(il, -lower(tp.value(out) * bbar.transpose()));
                  if (tp.needs_grad(ib)) tp.accumulate(ib, bbar);
                });
}

Var sqdist(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.cols()) throw DimensionError("sqdist: column counts differ");
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  Matrix d(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) d(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  }
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(d), "sqdist", {ia, ib}, [ia, ib](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(ia);
    const Matrix& yv = tp.value(ib);
    if (tp.needs_grad(ia)) {
      tp.accumulate(ia, 2.0 * (g.rowwise().sum().asDiagonal() * xv - g * yv));
    }
    if (tp.needs_grad(ib)) {
      tp.accumulate(ib, 2.0 * (g.colwise().sum().transpose().asDiagonal() * yv - g.transpose() * xv));
    }
  });
}

Var matern52_from_sqdist(Var d2) {
  static const double sqrt5 = std::sqrt(5.0);
  return unary(
      d2, "matern52",
      [](const Matrix& x) -> Matrix {
        const auto r = x.array().cwiseMax(0.0).sqrt();
        return ((1.0 + sqrt5 * r + (5.0 / 3.0) * r.square()) * (-sqrt5 * r).exp()).matrix();
      },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        const auto r = x.array().cwiseMax(0.0).sqrt();
        return (g.array() * (-5.0 / 6.0) * (1.0 + sqrt5 * r) * (-sqrt5 * r).exp()).matrix();
      });
}

Var lower_tri_exp_diag(Var raw) {
  if (raw.rows() != raw.cols()) throw DimensionError("lower_tri_exp_diag of a non-square matrix");
  return unary(
      raw, "lower_tri_exp_diag",
      [](const Matrix& x) -> Matrix {
        Matrix l = lower_strict(x);
        l.diagonal() = x.diagonal().array().exp().matrix();
        return l;
      },
      [](const Matrix& g, const Matrix&, const Matrix& v) -> Matrix {
        Matrix d = lower_strict(g);
        d.diagonal() = g.diagonal().cwiseProduct(v.diagonal());
        return d;
      });
}

}  // namespace gpcde::ad

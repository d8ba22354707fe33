#pragma once

// Reverse-mode differentiation over dense rank-2 blocks. Every op records its result on a
// Tape together with a closure that pushes the output adjoint back to its operands. Nodes
// that depend on no trainable parameter record no closure, so constant subgraphs cost
// nothing during the backward sweep.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/params.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace ssdial {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix v) {
    Node n;
    n.value = std::move(v);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

  /// Leaf bound to a parameter; its adjoint is added to `p.grad` by backward().
  Var param(Parameter& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  /// Same as param() but the gradient is discarded (frozen weights).
  Var frozen(const Parameter& p) {
    Node n;
    n.external = &p.value;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var push(Matrix v, bool requires_grad, Backward back) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Matrix& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Adjoint of a node, zero-initialized on first touch.
  Matrix& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) {
      const Matrix& v = value(id);
      n.grad = Matrix::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }

  /// Back-propagates d(out)/d(.) for a 1x1 output, accumulating into parameter grads.
  void backward(Var out, double seed = 1.0) {
    if (out.rows() != 1 || out.cols() != 1)
      throw DimensionError("backward: output must be 1x1, got " + std::to_string(out.rows()) + "x" +
                           std::to_string(out.cols()));
    if (!requires_grad(out.id())) return;
    grad(out.id())(0, 0) += seed;
    for (int id = out.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.back) n.back(*this, id);
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    Backward back;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("scalar(): node is not 1x1");
  return v(0, 0);
}
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                         shape_str(b.value()));
}

inline Tape& tape_of(Var a) { return *a.tape(); }

}  // namespace detail

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + detail::shape_str(a.value()) + " * " + detail::shape_str(b.value()));
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape("add", a, b);
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape("sub", a, b);
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), a.requires_grad() || b.requires_grad(), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

/// Element-wise product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape("mul", a, b);
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& t, int self) {
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
                  if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
                });
}

/// a (n x m) + row (1 x m) broadcast down the rows.
inline Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: " + detail::shape_str(a.value()) + " + " + detail::shape_str(row.value()));
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return t.push(std::move(v), a.requires_grad() || row.requires_grad(), [ia, ir](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum();
  });
}

/// a (n x m) scaled row-wise by col (n x 1).
inline Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows())
    throw DimensionError("mul_col: " + detail::shape_str(a.value()) + " * " + detail::shape_str(col.value()));
  Tape& t = detail::tape_of(a);
  const int ia = a.id(), ic = col.id();
  Matrix v = a.value().array().colwise() * col.value().col(0).array();
  return t.push(std::move(v), a.requires_grad() || col.requires_grad(), [ia, ic](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).array() += g.array().colwise() * t.value(ic).col(0).array();
    if (t.requires_grad(ic)) t.grad(ic) += g.cwiseProduct(t.value(ia)).rowwise().sum();
  });
}

inline Var scale(Var a, double s) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value() * s, a.requires_grad(), [ia, s](Tape& t, int self) { t.grad(ia) += s * t.grad(self); });
}

inline Var add_scalar(Var a, double s) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push((a.value().array() + s).matrix(), a.requires_grad(),
                [ia](Tape& t, int self) { t.grad(ia) += t.grad(self); });
}

inline Var neg(Var a) { return scale(a, -1.0); }

namespace detail {

/// Element-wise unary op given f(x) and f'(x, f(x)).
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  Matrix v = a.value().unaryExpr(f);
  return t.push(std::move(v), a.requires_grad(), [ia, df](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(ia);
    const Matrix& g = t.grad(self);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) ga(i, j) += g(i, j) * df(x(i, j), y(i, j));
  });
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}
inline Var sigmoid(Var a) {
  return detail::unary(a, detail::sigmoid, [](double, double y) { return y * (1.0 - y); });
}
inline Var exp(Var a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Var log(Var a) {
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Var softplus(Var a) {
  return detail::unary(a, detail::softplus, [](double x, double) { return detail::sigmoid(x); });
}
inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
/// Clamp with zero gradient outside [lo, hi].
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

inline Var sum(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), a.requires_grad(),
                [ia](Tape& t, int self) { t.grad(ia).array() += t.grad(self)(0, 0); });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

/// n x m -> n x 1.
inline Var row_sum(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix v = a.value().rowwise().sum();
  return t.push(std::move(v), a.requires_grad(), [ia](Tape& t, int self) {
    t.grad(ia).colwise() += t.grad(self).col(0);
  });
}

/// n x m -> 1 x m.
inline Var col_sum(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix v = a.value().colwise().sum();
  return t.push(std::move(v), a.requires_grad(), [ia](Tape& t, int self) {
    t.grad(ia).rowwise() += t.grad(self).row(0);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const Eigen::Index n = parts.front().rows();
  Eigen::Index width = 0;
  bool rg = false;
  for (const Var& p : parts) {
    if (p.rows() != n)
      throw DimensionError("concat_cols: row mismatch " + std::to_string(p.rows()) + " vs " + std::to_string(n));
    width += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix v(n, width);
  std::vector<std::pair<int, Eigen::Index>> ids;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    ids.emplace_back(p.id(), off);
    off += p.cols();
  }
  Tape& t = detail::tape_of(parts.front());
  return t.push(std::move(v), rg, [ids](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (auto [id, o] : ids) {
      if (!t.requires_grad(id)) continue;
      Matrix& gi = t.grad(id);
      gi += g.middleCols(o, gi.cols());
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::vector<Var>(parts)); }

inline Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                         detail::shape_str(a.value()));
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix v = a.value().middleCols(start, count);
  return t.push(std::move(v), a.requires_grad(), [ia, start, count](Tape& t, int self) {
    t.grad(ia).middleCols(start, count) += t.grad(self);
  });
}

/// Row gather (embedding lookup / row broadcast); backward scatter-adds.
inline Var gather_rows(Var a, std::vector<int> index) {
  Tape& t = detail::tape_of(a);
  const Matrix& src = a.value();
  Matrix v(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= src.rows())
      throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " out of " + detail::shape_str(src));
    v.row(static_cast<Eigen::Index>(i)) = src.row(index[i]);
  }
  const int ia = a.id();
  return t.push(std::move(v), a.requires_grad(), [ia, index = std::move(index)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

/// Repeats a 1 x m row n times.
inline Var repeat_row(Var row, Eigen::Index n) {
  if (row.rows() != 1) throw DimensionError("repeat_row: expected one row, got " + detail::shape_str(row.value()));
  return gather_rows(row, std::vector<int>(static_cast<std::size_t>(n), 0));
}

/// Reinterprets the row-major flattening of a as rows x cols.
inline Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& src = a.value();
  if (rows * cols != src.size())
    throw DimensionError("reshape: " + detail::shape_str(src) + " -> " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  const Eigen::Index sc = src.cols();
  Matrix v(rows, cols);
  for (Eigen::Index k = 0; k < src.size(); ++k) v(k / cols, k % cols) = src(k / sc, k % sc);
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(std::move(v), a.requires_grad(), [ia, cols, sc](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (Eigen::Index k = 0; k < g.size(); ++k) ga(k / sc, k % sc) += g(k / cols, k % cols);
  });
}

/// Row-wise log-softmax with max subtraction.
inline Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    v.row(i) = x.row(i).array() - lse;
  }
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(std::move(v), a.requires_grad(), [ia](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix p = t.value(self).array().exp().matrix();
    Matrix& ga = t.grad(ia);
    for (Eigen::Index i = 0; i < g.rows(); ++i) ga.row(i) += g.row(i) - p.row(i) * g.row(i).sum();
  });
}

inline Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix v(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    RowVector e = (x.row(i).array() - m).exp().matrix();
    v.row(i) = e / e.sum();
  }
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(std::move(v), a.requires_grad(), [ia](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& p = t.value(self);
    Matrix& ga = t.grad(ia);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double dot = g.row(i).dot(p.row(i));
      ga.row(i).array() += p.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

inline Var transpose(Var a) {
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().transpose(), a.requires_grad(),
                [ia](Tape& t, int self) { t.grad(ia) += t.grad(self).transpose(); });
}

/// Element-wise product with a constant mask/weight matrix (no gradient to the mask).
inline Var mul_const(Var a, const Matrix& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols())
    throw DimensionError("mul_const: " + detail::shape_str(a.value()) + " vs " + detail::shape_str(m));
  Tape& t = detail::tape_of(a);
  const int ia = a.id();
  return t.push(a.value().cwiseProduct(m), a.requires_grad(),
                [ia, m](Tape& t, int self) { t.grad(ia) += t.grad(self).cwiseProduct(m); });
}

}  // namespace ssdial

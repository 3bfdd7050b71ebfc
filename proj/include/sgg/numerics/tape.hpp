#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sgg/error.hpp"
#include "sgg/numerics/matrix.hpp"

namespace sgg {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// What softmax_row does with a row whose entries are all masked out.
enum class EmptyRow { Error, Zero };

/// Probabilities fed to binary_cross_entropy are clamped to
/// [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-12;

/// Reverse-mode differentiation record over a closed set of matrix
/// primitives. Nodes are appended in evaluation order, so insertion order is a
/// topological order and backward is a single reverse sweep.
class Tape {
 public:
  enum class Op : std::uint8_t {
    Leaf,
    MatMul,
    Aggregate,
    Add,
    AddBias,
    ConcatCols,
    Transpose,
    Relu,
    Sigmoid,
    SoftmaxRow,
    SelectRows,
    GatherElements,
    ScatterElements,
    Scale,
    ReduceSum,
    BinaryCrossEntropy,
    CrossEntropy,
  };

  struct Node {
    Op op = Op::Leaf;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    Matrix value;
    bool requires_grad = false;
    std::vector<std::size_t> index_a;  // row indices / labels
    std::vector<std::size_t> index_b;  // column indices
    std::vector<std::uint8_t> mask;    // softmax keep-mask, row-major
    std::vector<double> targets;       // BCE targets
    double scalar = 0.0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m) {
    require_finite(m, "constant");
    Node n;
    n.value = std::move(m);
    return push(std::move(n));
  }

  /// A leaf whose gradient is reported by backward().
  Var parameter(Matrix m) {
    require_finite(m, "parameter");
    Node n;
    n.value = std::move(m);
    n.requires_grad = true;
    Var v = push(std::move(n));
    params_.push_back(v.id);
    return v;
  }

  const Matrix& value(Var v) const { return node(v).value; }

  /// Gradient of the last backward() loss with respect to `v`. Zero when `v`
  /// does not influence the loss.
  Matrix grad(Var v) const {
    const Node& n = node(v);
    if (v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
    return Matrix(n.value.rows(), n.value.cols());
  }

  /// Runs the reverse sweep from a 1x1 loss and returns dLoss/dParam for every
  /// parameter, in registration order.
  std::vector<Matrix> backward(Var loss) {
    if (nodes_.empty()) throw InputError("backward: tape is empty");
    const Node& l = node(loss);
    if (l.value.rows() != 1 || l.value.cols() != 1) {
      throw ShapeError("backward: loss must be 1x1, got " + l.value.shape_string());
    }
    grads_.assign(nodes_.size(), Matrix());
    for (std::size_t i = 0; i <= loss.id; ++i) {
      if (nodes_[i].requires_grad) grads_[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
    }
    if (!nodes_[loss.id].requires_grad) return collect_param_grads();
    grads_[loss.id](0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (!nodes_[i].requires_grad) continue;
      propagate(i);
    }
    for (std::size_t p : params_) require_finite(grads_[p], "backward");
    return collect_param_grads();
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::size_t count(Op op) const {
    std::size_t c = 0;
    for (const auto& n : nodes_) c += n.op == op ? 1 : 0;
    return c;
  }

  /// One flag per ReLU input entry (positive?) and per clamped BCE input.
  /// Two evaluations with equal signatures lie on the same smooth piece, which
  /// is what a finite-difference check needs.
  std::vector<std::uint8_t> branch_signature() const {
    std::vector<std::uint8_t> sig;
    for (const auto& n : nodes_) {
      if (n.op == Op::Relu) {
        for (double v : nodes_[n.lhs].value.data()) sig.push_back(v > 0.0);
      } else if (n.op == Op::BinaryCrossEntropy) {
        for (double v : nodes_[n.lhs].value.data())
          sig.push_back(v < kProbClamp ? 0 : (v > 1.0 - kProbClamp ? 2 : 1));
      }
    }
    return sig;
  }

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  const Node& node(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw InputError("Var does not belong to this tape");
    return nodes_[v.id];
  }

 private:
  std::vector<Matrix> collect_param_grads() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (std::size_t p : params_) {
      out.push_back(grads_[p].empty() ? Matrix(nodes_[p].value.rows(), nodes_[p].value.cols()) : grads_[p]);
    }
    return out;
  }

  void accumulate(std::size_t target, const Matrix& g) {
    if (!nodes_[target].requires_grad) return;
    auto dst = grads_[target].data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }

  bool wants(std::size_t target) const { return nodes_[target].requires_grad; }

  void propagate(std::size_t i) {
    const Node& n = nodes_[i];
    const Matrix& g = grads_[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
      case Op::Aggregate: {
        const Matrix& a = nodes_[n.lhs].value;
        const Matrix& b = nodes_[n.rhs].value;
        if (wants(n.lhs)) accumulate(n.lhs, matmul(g, transpose(b)));
        if (wants(n.rhs)) accumulate(n.rhs, matmul(transpose(a), g));
        break;
      }
      case Op::Add:
        accumulate(n.lhs, g);
        accumulate(n.rhs, g);
        break;
      case Op::AddBias: {
        accumulate(n.lhs, g);
        if (wants(n.rhs)) {
          Matrix db(1, g.cols());
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) db(0, c) += g(r, c);
          accumulate(n.rhs, db);
        }
        break;
      }
      case Op::ConcatCols: {
        const std::size_t left = nodes_[n.lhs].value.cols();
        const std::size_t right = nodes_[n.rhs].value.cols();
        Matrix ga(g.rows(), left), gb(g.rows(), right);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < left; ++c) ga(r, c) = g(r, c);
          for (std::size_t c = 0; c < right; ++c) gb(r, c) = g(r, left + c);
        }
        accumulate(n.lhs, ga);
        accumulate(n.rhs, gb);
        break;
      }
      case Op::Transpose:
        accumulate(n.lhs, transpose(g));
        break;
      case Op::Relu: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix gx(x.rows(), x.cols());
        for (std::size_t k = 0; k < x.size(); ++k) gx.data()[k] = x.data()[k] > 0.0 ? g.data()[k] : 0.0;
        accumulate(n.lhs, gx);
        break;
      }
      case Op::Sigmoid: {
        const Matrix& y = n.value;
        Matrix gx(y.rows(), y.cols());
        for (std::size_t k = 0; k < y.size(); ++k) {
          const double s = y.data()[k];
          gx.data()[k] = g.data()[k] * s * (1.0 - s);
        }
        accumulate(n.lhs, gx);
        break;
      }
      case Op::SoftmaxRow: {
        const Matrix& y = n.value;
        Matrix gx(y.rows(), y.cols());
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) = y(r, c) * (g(r, c) - dot);
        }
        accumulate(n.lhs, gx);
        break;
      }
      case Op::SelectRows: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix gx(x.rows(), x.cols());
        for (std::size_t r = 0; r < n.index_a.size(); ++r)
          for (std::size_t c = 0; c < x.cols(); ++c) gx(n.index_a[r], c) += g(r, c);
        accumulate(n.lhs, gx);
        break;
      }
      case Op::GatherElements: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix gx(x.rows(), x.cols());
        for (std::size_t e = 0; e < n.index_a.size(); ++e) gx(n.index_a[e], n.index_b[e]) += g(e, 0);
        accumulate(n.lhs, gx);
        break;
      }
      case Op::ScatterElements: {
        Matrix gx(n.index_a.size(), 1);
        for (std::size_t e = 0; e < n.index_a.size(); ++e) gx(e, 0) = g(n.index_a[e], n.index_b[e]);
        accumulate(n.lhs, gx);
        break;
      }
      case Op::Scale: {
        Matrix gx(g.rows(), g.cols());
        for (std::size_t k = 0; k < g.size(); ++k) gx.data()[k] = n.scalar * g.data()[k];
        accumulate(n.lhs, gx);
        break;
      }
      case Op::ReduceSum: {
        const Matrix& x = nodes_[n.lhs].value;
        accumulate(n.lhs, Matrix(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::BinaryCrossEntropy: {
        const Matrix& s = nodes_[n.lhs].value;
        Matrix gx(s.rows(), s.cols());
        const double inv = 1.0 / static_cast<double>(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
          const double p = s.data()[k];
          if (p < kProbClamp || p > 1.0 - kProbClamp) continue;  // clamp is flat
          const double y = n.targets[k];
          gx.data()[k] = g(0, 0) * inv * (-(y / p) + (1.0 - y) / (1.0 - p));
        }
        accumulate(n.lhs, gx);
        break;
      }
      case Op::CrossEntropy: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix gx(x.rows(), x.cols());
        const double inv = 1.0 / static_cast<double>(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t c = 0; c < x.cols(); ++c) m = std::max(m, x(r, c));
          double z = 0.0;
          for (std::size_t c = 0; c < x.cols(); ++c) z += std::exp(x(r, c) - m);
          for (std::size_t c = 0; c < x.cols(); ++c) {
            const double p = std::exp(x(r, c) - m) / z;
            gx(r, c) = g(0, 0) * inv * (p - (c == n.index_a[r] ? 1.0 : 0.0));
          }
        }
        accumulate(n.lhs, gx);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> params_;
  std::vector<Matrix> grads_;
};

inline const Matrix& Var::value() const {
  if (tape == nullptr) throw InputError("Var: unbound handle");
  return tape->value(*this);
}

namespace detail {

inline Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw InputError("Var: unbound handle");
  return *a.tape;
}

inline Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw InputError("operands live on different tapes");
  return tape_of(a);
}

inline Var record(Tape& t, Tape::Op op, Matrix value, std::initializer_list<Var> inputs,
                  Tape::Node extra = {}) {
  require_finite(value, "tape op");
  extra.op = op;
  extra.value = std::move(value);
  extra.requires_grad = false;
  std::size_t slot = 0;
  for (Var v : inputs) {
    (slot++ == 0 ? extra.lhs : extra.rhs) = v.id;
    extra.requires_grad = extra.requires_grad || t.node(v).requires_grad;
  }
  return t.push(std::move(extra));
}

}  // namespace detail

/// Differentiable matrix product.
inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  return detail::record(t, Tape::Op::MatMul, matmul(a.value(), b.value()), {a, b});
}

/// Neighbourhood aggregation `weights * features`: a matmul whose inner sum
/// runs over graph nodes and is therefore accumulated order-invariantly.
inline Var aggregate(Var weights, Var features) {
  Tape& t = detail::tape_of(weights, features);
  const Matrix& a = weights.value();
  const Matrix& b = features.value();
  if (a.cols() != b.rows()) throw ShapeError("aggregate: " + a.shape_string() + " x " + b.shape_string());
  Matrix out(a.rows(), b.cols());
  std::vector<double> terms;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      terms.clear();
      for (std::size_t k = 0; k < a.cols(); ++k) terms.push_back(a(i, k) * b(k, j));
      out(i, j) = order_invariant_sum(terms);
    }
  }
  return detail::record(t, Tape::Op::Aggregate, std::move(out), {weights, features});
}

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError("add: " + a.value().shape_string() + " + " + b.value().shape_string());
  }
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] += b.value().data()[k];
  return detail::record(t, Tape::Op::Add, std::move(out), {a, b});
}

/// `x + 1 * bias` where bias is a 1 x cols row broadcast over every row.
inline Var add_bias(Var x, Var bias) {
  Tape& t = detail::tape_of(x, bias);
  const Matrix& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ShapeError("add_bias: " + x.value().shape_string() + " + " + b.shape_string());
  }
  Matrix out = x.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += b(0, c);
  return detail::record(t, Tape::Op::AddBias, std::move(out), {x, bias});
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.rows() != y.rows()) throw ShapeError("concat_cols: " + x.shape_string() + " | " + y.shape_string());
  Matrix out(x.rows(), x.cols() + y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) out(r, x.cols() + c) = y(r, c);
  }
  return detail::record(t, Tape::Op::ConcatCols, std::move(out), {a, b});
}

inline Var transpose(Var a) {
  return detail::record(detail::tape_of(a), Tape::Op::Transpose, transpose(a.value()), {a});
}

inline Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return detail::record(detail::tape_of(a), Tape::Op::Relu, std::move(out), {a});
}

/// Logistic function, evaluated as exp(x)/(1+exp(x)) for negative x so large
/// negative inputs never overflow.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = sigmoid(v);
  return detail::record(detail::tape_of(a), Tape::Op::Sigmoid, std::move(out), {a});
}

/// Row-wise softmax over entries where `keep` is nonzero (row-major, same
/// size as `x`; empty means keep everything). Masked entries come out exactly
/// 0. Max-subtracted, normaliser summed order-invariantly.
inline Matrix softmax_row(const Matrix& x, std::span<const std::uint8_t> keep = {},
                          EmptyRow empty_rows = EmptyRow::Error) {
  if (!keep.empty() && keep.size() != x.size()) {
    throw ShapeError("softmax_row: mask has " + std::to_string(keep.size()) + " entries for " +
                     x.shape_string());
  }
  Matrix out(x.rows(), x.cols());
  std::vector<double> terms;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (!keep.empty() && !keep[r * x.cols() + c]) continue;
      m = std::max(m, x(r, c));
      any = true;
    }
    if (!any) {
      if (empty_rows == EmptyRow::Error) {
        throw InputError("softmax_row: row " + std::to_string(r) + " is fully masked");
      }
      continue;
    }
    terms.clear();
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (!keep.empty() && !keep[r * x.cols() + c]) continue;
      out(r, c) = std::exp(x(r, c) - m);
      terms.push_back(out(r, c));
    }
    const double z = order_invariant_sum(terms);
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= z;
  }
  require_finite(out, "softmax_row");
  return out;
}

inline Var softmax_row(Var x, std::vector<std::uint8_t> keep = {}, EmptyRow empty_rows = EmptyRow::Error) {
  Matrix out = softmax_row(x.value(), keep, empty_rows);
  Tape::Node extra;
  extra.mask = std::move(keep);
  return detail::record(detail::tape_of(x), Tape::Op::SoftmaxRow, std::move(out), {x}, std::move(extra));
}

/// Gathers rows `rows[k]` of `x`; repeats allowed.
inline Var select_rows(Var x, std::vector<std::size_t> rows) {
  const Matrix& v = x.value();
  Matrix out(rows.size(), v.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= v.rows()) throw ShapeError("select_rows: index " + std::to_string(rows[r]) + " out of range");
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v(rows[r], c);
  }
  Tape::Node extra;
  extra.index_a = std::move(rows);
  return detail::record(detail::tape_of(x), Tape::Op::SelectRows, std::move(out), {x}, std::move(extra));
}

/// Column vector of the entries x(rows[e], cols[e]).
inline Var gather_elements(Var x, std::vector<std::size_t> rows, std::vector<std::size_t> cols) {
  const Matrix& v = x.value();
  if (rows.size() != cols.size()) throw ShapeError("gather_elements: index lists differ in length");
  Matrix out(rows.size(), 1);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (rows[e] >= v.rows() || cols[e] >= v.cols()) throw ShapeError("gather_elements: index out of range");
    out(e, 0) = v(rows[e], cols[e]);
  }
  Tape::Node extra;
  extra.index_a = std::move(rows);
  extra.index_b = std::move(cols);
  return detail::record(detail::tape_of(x), Tape::Op::GatherElements, std::move(out), {x}, std::move(extra));
}

/// Places column vector `values` at (rows[e], cols[e]) of an otherwise zero
/// `out_rows` x `out_cols` matrix. Positions must be distinct.
inline Var scatter_elements(Var values, std::vector<std::size_t> rows, std::vector<std::size_t> cols,
                            std::size_t out_rows, std::size_t out_cols) {
  const Matrix& v = values.value();
  if (v.cols() != 1 || v.rows() != rows.size() || rows.size() != cols.size()) {
    throw ShapeError("scatter_elements: expected " + std::to_string(rows.size()) + "x1 values, got " +
                     v.shape_string());
  }
  Matrix out(out_rows, out_cols);
  std::vector<std::uint8_t> seen(out_rows * out_cols, 0);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (rows[e] >= out_rows || cols[e] >= out_cols) throw ShapeError("scatter_elements: index out of range");
    auto& s = seen[rows[e] * out_cols + cols[e]];
    if (s) throw InputError("scatter_elements: duplicate position");
    s = 1;
    out(rows[e], cols[e]) = v(e, 0);
  }
  Tape::Node extra;
  extra.index_a = std::move(rows);
  extra.index_b = std::move(cols);
  return detail::record(detail::tape_of(values), Tape::Op::ScatterElements, std::move(out), {values},
                        std::move(extra));
}

inline Var scale(Var x, double s) {
  Matrix out = x.value();
  for (double& v : out.data()) v *= s;
  Tape::Node extra;
  extra.scalar = s;
  return detail::record(detail::tape_of(x), Tape::Op::Scale, std::move(out), {x}, std::move(extra));
}

inline Var reduce_sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return detail::record(detail::tape_of(x), Tape::Op::ReduceSum, Matrix(1, 1, s), {x});
}

/// Mean binary cross-entropy of probabilities `scores` against 0/1 `targets`
/// (one per entry). Scores are clamped away from 0 and 1 first.
inline Var binary_cross_entropy(Var scores, std::vector<double> targets) {
  const Matrix& s = scores.value();
  if (s.size() != targets.size()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(s.size()) + " scores, " +
                     std::to_string(targets.size()) + " targets");
  }
  if (s.size() == 0) throw InputError("binary_cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double p = std::clamp(s.data()[k], kProbClamp, 1.0 - kProbClamp);
    const double y = targets[k];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  Tape::Node extra;
  extra.targets = std::move(targets);
  return detail::record(detail::tape_of(scores), Tape::Op::BinaryCrossEntropy,
                        Matrix(1, 1, total / static_cast<double>(s.size())), {scores}, std::move(extra));
}

/// Mean over rows of the softmax cross-entropy of `logits` against `labels`.
inline Var cross_entropy(Var logits, std::vector<std::size_t> labels) {
  const Matrix& x = logits.value();
  if (x.rows() != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + x.shape_string());
  }
  if (x.rows() == 0) throw InputError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (labels[r] >= x.cols()) throw InputError("cross_entropy: label " + std::to_string(labels[r]) + " out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) m = std::max(m, x(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) z += std::exp(x(r, c) - m);
    total += m + std::log(z) - x(r, labels[r]);
  }
  Tape::Node extra;
  extra.index_a = std::move(labels);
  return detail::record(detail::tape_of(logits), Tape::Op::CrossEntropy,
                        Matrix(1, 1, total / static_cast<double>(x.rows())), {logits}, std::move(extra));
}

}  // namespace sgg

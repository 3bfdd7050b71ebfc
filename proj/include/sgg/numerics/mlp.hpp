#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "sgg/numerics/params.hpp"

namespace sgg {

/// relu(x W1 + b1) W2 + b2, rows of x are the batch.
template <class T>
struct Mlp2T {
  T w1;  // in x hidden
  T b1;  // 1 x hidden
  T w2;  // hidden x out
  T b2;  // 1 x out

  template <class F, class... S>
  static void visit(F&& f, S&... s) {
    f("W1", s.w1...);
    f("b1", s.b1...);
    f("W2", s.w2...);
    f("b2", s.b2...);
  }
};

using Mlp2 = Mlp2T<Matrix>;
using Mlp2Vars = Mlp2T<Var>;

inline Mlp2 zero_mlp2(std::size_t in, std::size_t hidden, std::size_t out) {
  return {Matrix(in, hidden), Matrix(1, hidden), Matrix(hidden, out), Matrix(1, out)};
}

/// He-scaled weights, zero biases.
inline Mlp2 random_mlp2(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  return {random_matrix(in, hidden, std::sqrt(2.0 / static_cast<double>(in)), rng), Matrix(1, hidden),
          random_matrix(hidden, out, std::sqrt(1.0 / static_cast<double>(hidden)), rng), Matrix(1, out)};
}

inline void validate(const Mlp2& m) {
  const bool ok = m.b1.rows() == 1 && m.b1.cols() == m.w1.cols() && m.w2.rows() == m.w1.cols() &&
                  m.b2.rows() == 1 && m.b2.cols() == m.w2.cols();
  if (!ok) {
    throw ShapeError("Mlp2: inconsistent shapes W1 " + m.w1.shape_string() + ", b1 " + m.b1.shape_string() +
                     ", W2 " + m.w2.shape_string() + ", b2 " + m.b2.shape_string());
  }
  validate_finite(m);
}

inline Var mlp2_forward(const Mlp2Vars& m, Var x) {
  if (x.cols() != m.w1.rows()) {
    throw ShapeError("mlp2_forward: input " + x.value().shape_string() + " for W1 " + m.w1.value().shape_string());
  }
  return add_bias(matmul(relu(add_bias(matmul(x, m.w1), m.b1)), m.w2), m.b2);
}

inline Matrix mlp2_forward(const Mlp2& m, const Matrix& x) {
  validate(m);
  Tape tape;
  return mlp2_forward(bind(tape, m, false), tape.constant(x)).value();
}

}  // namespace sgg

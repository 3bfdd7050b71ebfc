#pragma once

#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>

#include "sgg/numerics/matrix.hpp"
#include "sgg/numerics/tape.hpp"
#include "sgg/rng.hpp"

// Parameter bundles are class templates over their storage type: P<Matrix>
// holds values, P<Var> holds the matching tape handles. Every bundle exposes
//
//   template <class F, class... S> static void visit(F&& f, S&... s);
//
// which calls f(name, s.member...) for each leaf in a fixed order, walking
// several bundles in lockstep. Everything below is written once against that.

namespace sgg {

namespace detail {

template <class F>
auto prefixed(const std::string& prefix, F& f) {
  return [prefix, &f](const std::string& name, auto&... leaves) { f(prefix + "." + name, leaves...); };
}

}  // namespace detail

/// Visits a nested bundle member under `prefix.`.
template <class F, class First, class... Rest>
void visit_nested(const std::string& prefix, F& f, First& first, Rest&... rest) {
  std::remove_cvref_t<First>::visit(detail::prefixed(prefix, f), first, rest...);
}

template <class F, class First, class... Rest>
void visit_params(F&& f, First& first, Rest&... rest) {
  std::remove_cvref_t<First>::visit(f, first, rest...);
}

/// Registers every leaf of `values` on `tape`, as trainable parameters or as
/// constants, and returns the handle bundle.
template <template <class> class P>
P<Var> bind(Tape& tape, const P<Matrix>& values, bool trainable = true) {
  P<Var> vars{};
  visit_params([&](const std::string&, const Matrix& m, Var& v) { v = trainable ? tape.parameter(m) : tape.constant(m); },
               values, vars);
  return vars;
}

/// Plain SGD: value -= learning_rate * grad, using the tape's last backward.
template <template <class> class P>
void sgd_step(P<Matrix>& values, const P<Var>& vars, const Tape& tape, double learning_rate) {
  visit_params(
      [&](const std::string& name, Matrix& m, const Var& v) {
        const Matrix g = tape.grad(v);
        for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] -= learning_rate * g.data()[k];
        if (!m.all_finite()) throw NumericalError("sgd_step: parameter " + name + " diverged");
      },
      values, vars);
}

template <class Bundle>
std::size_t scalar_count(const Bundle& values) {
  std::size_t n = 0;
  visit_params([&](const std::string&, const Matrix& m) { n += m.size(); }, values);
  return n;
}

template <class Bundle>
void validate_finite(const Bundle& values) {
  visit_params(
      [](const std::string& name, const Matrix& m) {
        if (!m.all_finite()) throw NumericalError("parameter " + name + " is not finite");
      },
      values);
}

/// Entries drawn N(0, scale^2).
inline Matrix random_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

}  // namespace sgg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sgg/numerics/tape.hpp"

namespace sgg {

struct GradCheckResult {
  double max_error = 0.0;        // worst |analytic - numeric| / max(1, |analytic|, |numeric|)
  std::size_t checked = 0;       // coordinates compared
  std::size_t skipped_kinks = 0; // coordinates whose +-h probes straddle a ReLU/clamp kink
  std::string worst;             // "input[k](r,c)" of the worst coordinate
};

/// Compares reverse-mode gradients with central finite differences.
///
/// `build(tape, leaves)` must return a 1x1 loss computed from `leaves`, which
/// are `inputs` registered as parameters. A coordinate is skipped when the
/// probes at x+h and x-h land on a different smooth piece than x, since the
/// difference quotient is meaningless across a kink.
template <class Build>
GradCheckResult check_gradients(Build&& build, const std::vector<Matrix>& inputs, double h = 1e-5) {
  auto evaluate = [&](const std::vector<Matrix>& xs, std::vector<std::uint8_t>* signature) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(xs.size());
    for (const auto& x : xs) leaves.push_back(tape.parameter(x));
    const Var loss = build(tape, leaves);
    if (signature) *signature = tape.branch_signature();
    return loss.value()(0, 0);
  };

  std::vector<Matrix> analytic;
  std::vector<std::uint8_t> base_signature;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : inputs) leaves.push_back(tape.parameter(x));
    const Var loss = build(tape, leaves);
    base_signature = tape.branch_signature();
    analytic = tape.backward(loss);
  }

  GradCheckResult result;
  std::vector<Matrix> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t e = 0; e < inputs[k].size(); ++e) {
      const double x0 = inputs[k].data()[e];
      std::vector<std::uint8_t> sig_plus, sig_minus;
      probe[k].data()[e] = x0 + h;
      const double f_plus = evaluate(probe, &sig_plus);
      probe[k].data()[e] = x0 - h;
      const double f_minus = evaluate(probe, &sig_minus);
      probe[k].data()[e] = x0;
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[k].data()[e];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.checked;
      if (err > result.max_error || result.worst.empty()) {
        result.max_error = std::max(result.max_error, err);
        const std::size_t cols = inputs[k].cols();
        result.worst = "input[" + std::to_string(k) + "](" + std::to_string(e / cols) + "," +
                       std::to_string(e % cols) + ")";
      }
    }
  }
  return result;
}

}  // namespace sgg

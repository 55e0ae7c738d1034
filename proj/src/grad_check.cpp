// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gi {
namespace {

double evaluate(const ScalarFunction& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape(false);
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor<double>& t : inputs) leaves.push_back(tape.leaf(t, false));
  const Var<double> out = f(tape, leaves);
  if (out.size() != 1) throw ContractError("grad_check: function must return a scalar");
  return out.value()[0];
}

void require_finite(double v, std::size_t input, std::size_t index, const char* what) {
  if (!std::isfinite(v))
    throw NumericError(std::string("grad_check: non-finite ") + what + " at input " + std::to_string(input) +
                       ", entry " + std::to_string(index));
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFunction& f, const std::vector<Tensor<double>>& inputs, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");

  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const Tensor<double>& t : inputs) leaves.push_back(tape.leaf(t));
  const Var<double> loss = f(tape, leaves);
  require_finite(loss.value()[0], 0, 0, "function value");
  tape.backward(loss);

  GradCheckReport report;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double>& analytic = leaves[i].grad();
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      require_finite(analytic[j], i, j, "analytic gradient");
      const double original = probe[i][j];
      probe[i][j] = original + h;
      const double plus = evaluate(f, probe);
      probe[i][j] = original - h;
      const double minus = evaluate(f, probe);
      probe[i][j] = original;
      require_finite(plus, i, j, "perturbed value");
      require_finite(minus, i, j, "perturbed value");
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[j] - numeric) / denom;
      if (err > report.max_rel_error) report = {err, i, j, analytic[j], numeric};
    }
  }
  return report;
}

}  // namespace gi

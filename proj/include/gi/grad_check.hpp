// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "gi/autodiff.hpp"

namespace gi {

/// Builds a scalar from leaves placed on the given tape.
using ScalarFunction = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of f against central differences with step h.
/// Per entry: |analytic − cd| / max(|analytic|, |cd|, 1e-8). Throws NumericError
/// naming the input and flat index of the first non-finite value.
GradCheckReport grad_check_report(const ScalarFunction& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5);

inline double grad_check(const ScalarFunction& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5) {
  return grad_check_report(f, inputs, h).max_rel_error;
}

}  // namespace gi

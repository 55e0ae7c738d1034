// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "gi/swin1d.hpp"
#include "test_util.hpp"

namespace gi::test {

/// Exact dependence pattern of one 1D-Swin block: entry [o][src] is true when
/// some gradient entry of output token o with respect to input token src is nonzero.
inline std::vector<std::vector<bool>> block_dependence(const Swin1dParams& params, const Swin1dConfig& c,
                                                       const Tensor<double>& x) {
  std::vector<std::vector<bool>> pattern;
  Rng rng(12345);
  for (std::size_t o = 0;; ++o) {
    Tape<double> tape;
    auto w = map_tensors<Var<double>>(params, "", [&](const std::string&, const Tensor<double>& t) {
      return tape.leaf(t, false);
    });
    auto in = tape.leaf(x);
    auto out = swin1d_forward(in, w, c, false).output;
    if (o == out.rows()) break;
    auto row = slice_rows(out, o, 1);
    tape.backward(sum(mul(row, tape.constant(random_tensor(row.shape(), rng)))));
    std::vector<bool> deps(x.rows(), false);
    for (std::size_t src = 0; src < x.rows(); ++src)
      for (std::size_t c2 = 0; c2 < x.cols(); ++c2) deps[src] = deps[src] || in.grad()(src, c2) != 0.0;
    pattern.push_back(deps);
  }
  return pattern;
}

}  // namespace gi::test

// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// The 1D-Swin block: n×d tokens → ⌊n/2⌋ × (2d/α) tokens.
//
//   1. split into windows of k tokens, run attention sublayer 1 in each window;
//   2. roll the concatenated result by t, re-split, run sublayer 2 per window,
//      roll back by −t;
//   3. drop the trailing token if n is odd, concatenate adjacent token pairs and
//      apply a linear map 2d → 2d/α.
//
// Both sublayers are shared by every window of the layer. The exact number of
// multiply-adds for one block, with S = Σ_windows L² = ⌊n/k⌋·k² + (n mod k)²,
// n' = n − (n mod 2) and d_out = 2d/α:
//
//   2 · (4·n·d² + 2·d·S + [ff] 4·n·d²)  +  (n'/2)·2d·d_out
//
// of which 2·d·S are attention scores and 2·d·S attention-weighted sums.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gi/attention.hpp"

namespace gi {

struct Swin1dConfig {
  std::size_t window = 4;  ///< k
  std::size_t shift = 2;   ///< t, 0 ≤ t < k
  double alpha = 1.0;      ///< width scaling: d_out = 2d/α
  std::size_t heads = 1;
  bool ff = true;
  bool rel_bias = true;
};

/// Swin1dConfig with the half-window default shift.
Swin1dConfig swin_config(std::size_t window, std::size_t heads, double alpha = 1.0);

/// 2d/α, or ConfigError when it is not a positive integer or the shift is out of range.
std::size_t swin_output_width(const Swin1dConfig& c, std::size_t width);

template <class T>
struct SwinWeights {
  MhaWeights<T> mha1;
  MhaWeights<T> mha2;
  T merge_w;  ///< 2d × d_out
  T merge_b;  ///< d_out
};

using Swin1dParams = SwinWeights<Tensor<double>>;

template <class T, class Fn>
void for_each_tensor(SwinWeights<T>& w, const std::string& prefix, Fn&& fn) {
  for_each_tensor(w.mha1, prefix + "mha1.", fn);
  for_each_tensor(w.mha2, prefix + "mha2.", fn);
  fn(prefix + "merge_w", w.merge_w);
  fn(prefix + "merge_b", w.merge_b);
}

template <class U, class T, class Fn>
SwinWeights<U> map_tensors(const SwinWeights<T>& w, const std::string& prefix, Fn&& fn) {
  SwinWeights<U> out;
  out.mha1 = map_tensors<U>(w.mha1, prefix + "mha1.", fn);
  out.mha2 = map_tensors<U>(w.mha2, prefix + "mha2.", fn);
  out.merge_w = fn(prefix + "merge_w", w.merge_w);
  out.merge_b = fn(prefix + "merge_b", w.merge_b);
  return out;
}

/// Two independently initialised attention sublayers of identical shape plus the merge map.
Swin1dParams init_swin(const Swin1dConfig& c, std::size_t width, Rng& rng);

struct BlockMadds {
  std::uint64_t projection = 0;  ///< Q/K/V/O, feed-forward and merge
  std::uint64_t score = 0;
  std::uint64_t mix = 0;
  std::uint64_t total() const { return projection + score + mix; }
};

/// Closed-form multiply-add count of one block on n tokens of width d.
BlockMadds swin_block_madds(const Swin1dConfig& c, std::size_t n, std::size_t width);

template <class Real>
struct SwinOutput {
  Var<Real> output;
  std::vector<AttentionRecord> records;
};

/// Roll by t, window-partition by k, attend per window, merge, roll back by −t.
/// Records are tagged with `layer` and `slot`.
template <class Real>
SwinOutput<Real> shifted_pass(Var<Real> x, const MhaWeights<Var<Real>>& p, std::size_t k, std::size_t t, bool capture,
                              std::size_t layer = 0, std::size_t slot = 1);

/// linear(concat_pairs(x)); x must have an even token count.
template <class Real>
Var<Real> token_merge(Var<Real> x, Var<Real> weight, Var<Real> bias);

template <class Real>
SwinOutput<Real> swin1d_forward(Var<Real> x, const SwinWeights<Var<Real>>& p, const Swin1dConfig& c, bool capture,
                                std::size_t layer = 1);

}  // namespace gi

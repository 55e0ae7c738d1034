// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-head self-attention sublayers, window partitioning and a dense
// reference implementation.
//
// One attention sublayer on an L×d token matrix is
//
//   x1 = x + (MHA(LN1(x)))·Wo
//   y  = x1 + GELU(LN2(x1)·W1 + b1)·W2 + b2        (feed-forward, optional)
//
// with W1: d×2d and W2: 2d×d. Heads split the projected Q/K/V columns into
// H contiguous groups of d/H. With a relative position table (2k−1)×H, head h
// adds table[(j − i) + k − 1][h] to the logit of query i and key j.
//
// Multiply-adds per sublayer on a window of length L:
//   projections 4·L·d²,  scores L²·d,  weighted sum L²·d,  feed-forward 4·L·d².

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gi/autodiff.hpp"
#include "gi/rng.hpp"

namespace gi {

template <class T>
struct FeedForward {
  T ln_gain, ln_bias;
  T w1, b1, w2, b2;
};

/// Learnable tensors of one attention sublayer. T is Tensor<double> for stored
/// parameters or Var<Real> once bound to a tape.
template <class T>
struct MhaWeights {
  std::size_t heads = 1;
  T ln_gain, ln_bias;
  T wq, wk, wv, wo;
  std::optional<T> rel_bias;
  std::optional<FeedForward<T>> ff;
};

using MhaParams = MhaWeights<Tensor<double>>;

struct MhaShape {
  std::size_t width = 0;
  std::size_t heads = 1;
  bool ff = true;
  /// Window length covered by the relative position table; 0 disables it.
  std::size_t rel_bias_span = 0;
};

/// Calls fn(name, field) for every tensor, in a fixed order.
template <class T, class Fn>
void for_each_tensor(MhaWeights<T>& w, const std::string& prefix, Fn&& fn) {
  fn(prefix + "ln_gain", w.ln_gain);
  fn(prefix + "ln_bias", w.ln_bias);
  fn(prefix + "wq", w.wq);
  fn(prefix + "wk", w.wk);
  fn(prefix + "wv", w.wv);
  fn(prefix + "wo", w.wo);
  if (w.rel_bias) fn(prefix + "rel_bias", *w.rel_bias);
  if (w.ff) {
    fn(prefix + "ff.ln_gain", w.ff->ln_gain);
    fn(prefix + "ff.ln_bias", w.ff->ln_bias);
    fn(prefix + "ff.w1", w.ff->w1);
    fn(prefix + "ff.b1", w.ff->b1);
    fn(prefix + "ff.w2", w.ff->w2);
    fn(prefix + "ff.b2", w.ff->b2);
  }
}

/// Structure-preserving conversion, e.g. stored tensors to tape leaves.
template <class U, class T, class Fn>
MhaWeights<U> map_tensors(const MhaWeights<T>& w, const std::string& prefix, Fn&& fn) {
  MhaWeights<U> out;
  out.heads = w.heads;
  out.ln_gain = fn(prefix + "ln_gain", w.ln_gain);
  out.ln_bias = fn(prefix + "ln_bias", w.ln_bias);
  out.wq = fn(prefix + "wq", w.wq);
  out.wk = fn(prefix + "wk", w.wk);
  out.wv = fn(prefix + "wv", w.wv);
  out.wo = fn(prefix + "wo", w.wo);
  if (w.rel_bias) out.rel_bias = fn(prefix + "rel_bias", *w.rel_bias);
  if (w.ff) {
    FeedForward<U> ff;
    ff.ln_gain = fn(prefix + "ff.ln_gain", w.ff->ln_gain);
    ff.ln_bias = fn(prefix + "ff.ln_bias", w.ff->ln_bias);
    ff.w1 = fn(prefix + "ff.w1", w.ff->w1);
    ff.b1 = fn(prefix + "ff.b1", w.ff->b1);
    ff.w2 = fn(prefix + "ff.w2", w.ff->w2);
    ff.b2 = fn(prefix + "ff.b2", w.ff->b2);
    out.ff = std::move(ff);
  }
  return out;
}

/// Gaussian weights with std 1/√fan_in, zero biases, unit layer-norm gains,
/// zero relative position table.
MhaParams init_mha(const MhaShape& shape, Rng& rng);

/// Checks d % H and that all tensors have the shapes implied by `width`.
void validate_mha(const MhaParams& p, std::size_t width);

/// Attention weights captured from one window: one L×L row-stochastic matrix per head.
struct AttentionRecord {
  std::size_t layer = 0;   ///< 1-based 1D-Swin layer
  std::size_t slot = 1;    ///< 1 = local windows, 2 = shifted windows
  std::size_t window = 0;  ///< window index in the (rolled) partition
  std::vector<Tensor<double>> heads;
};

template <class Real>
struct MhaOutput {
  Var<Real> output;
  /// Per-head weights; present only when capture was requested.
  std::optional<std::vector<Tensor<double>>> weights;
};

/// One attention sublayer (plus feed-forward when present) on an L×d window.
template <class Real>
MhaOutput<Real> multi_head_attention(const MhaWeights<Var<Real>>& p, Var<Real> x, bool capture);

/// Lengths of the windows produced by window_partition: ⌊n/k⌋ of length k, then n mod k if nonzero.
std::vector<std::size_t> window_lengths(std::size_t n, std::size_t k);

/// Σ over windows of L², the attention-score footprint of one partition.
std::size_t window_square_sum(std::size_t n, std::size_t k);

template <class Real>
std::vector<Var<Real>> window_partition(Var<Real> x, std::size_t k);

/// Inverse of window_partition.
template <class Real>
Var<Real> window_merge(const std::vector<Var<Real>>& windows);

/// The same sublayer evaluated over all n tokens with plain loops, no tape.
Tensor<double> dense_attention_oracle(const Tensor<double>& x, const MhaParams& p);

}  // namespace gi

// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/swin1d.hpp"

#include <cmath>

namespace gi {

Swin1dConfig swin_config(std::size_t window, std::size_t heads, double alpha) {
  Swin1dConfig c;
  c.window = window;
  c.shift = window / 2;
  c.alpha = alpha;
  c.heads = heads;
  return c;
}

std::size_t swin_output_width(const Swin1dConfig& c, std::size_t width) {
  if (c.window == 0) throw ConfigError("1D-Swin window size must be at least 1");
  if (c.shift >= c.window)
    throw ConfigError("1D-Swin shift " + std::to_string(c.shift) + " must be below window size " +
                      std::to_string(c.window));
  if (!(c.alpha > 0.0)) throw ConfigError("1D-Swin alpha must be positive");
  const double out = 2.0 * static_cast<double>(width) / c.alpha;
  const double rounded = std::round(out);
  if (rounded < 1.0 || std::abs(out - rounded) > 1e-9)
    throw ConfigError("1D-Swin width " + std::to_string(width) + " with alpha " + std::to_string(c.alpha) +
                      " gives non-integer output width " + std::to_string(out));
  return static_cast<std::size_t>(rounded);
}

Swin1dParams init_swin(const Swin1dConfig& c, std::size_t width, Rng& rng) {
  const std::size_t out = swin_output_width(c, width);
  const MhaShape shape{width, c.heads, c.ff, c.rel_bias ? c.window : 0};
  Swin1dParams p;
  p.mha1 = init_mha(shape, rng);
  p.mha2 = init_mha(shape, rng);
  p.merge_w = Tensor<double>({2 * width, out});
  const double stddev = 1.0 / std::sqrt(static_cast<double>(2 * width));
  for (double& v : p.merge_w.data()) v = stddev * rng.normal();
  p.merge_b = Tensor<double>({out});
  return p;
}

BlockMadds swin_block_madds(const Swin1dConfig& c, std::size_t n, std::size_t d) {
  const std::uint64_t out = swin_output_width(c, d);
  const std::uint64_t un = n, ud = d;
  const std::uint64_t squares = window_square_sum(n, c.window);
  BlockMadds m;
  const std::uint64_t per_slot_projection = 4 * un * ud * ud + (c.ff ? 4 * un * ud * ud : 0);
  const std::uint64_t even = un - un % 2;
  m.projection = 2 * per_slot_projection + (even / 2) * (2 * ud) * out;
  m.score = 2 * ud * squares;
  m.mix = 2 * ud * squares;
  return m;
}

template <class Real>
SwinOutput<Real> shifted_pass(Var<Real> x, const MhaWeights<Var<Real>>& p, std::size_t k, std::size_t t, bool capture,
                              std::size_t layer, std::size_t slot) {
  if (k == 0) throw ConfigError("window size must be at least 1");
  if (t >= k) throw ConfigError("shift " + std::to_string(t) + " must be below window size " + std::to_string(k));
  const auto shift = static_cast<std::ptrdiff_t>(t);
  const Var<Real> rolled = t == 0 ? x : roll(x, shift);
  std::vector<Var<Real>> windows = window_partition(rolled, k);

  SwinOutput<Real> result;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    MhaOutput<Real> out = multi_head_attention(p, windows[w], capture);
    windows[w] = out.output;
    if (out.weights) result.records.push_back(AttentionRecord{layer, slot, w, std::move(*out.weights)});
  }
  const Var<Real> merged = window_merge(windows);
  result.output = t == 0 ? merged : roll(merged, -shift);
  return result;
}

template <class Real>
Var<Real> token_merge(Var<Real> x, Var<Real> weight, Var<Real> bias) {
  return linear(concat_pairs(x), weight, bias);
}

template <class Real>
SwinOutput<Real> swin1d_forward(Var<Real> x, const SwinWeights<Var<Real>>& p, const Swin1dConfig& c, bool capture,
                                std::size_t layer) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw ContractError("1D-Swin block needs at least 2 tokens, got " + std::to_string(n));
  const std::size_t out_width = swin_output_width(c, d);
  if (p.merge_w.rows() != 2 * d || p.merge_w.cols() != out_width)
    throw DimensionError("1D-Swin merge map " + shape_string(p.merge_w.shape()) + " does not fit width " +
                         std::to_string(d) + " -> " + std::to_string(out_width));

  SwinOutput<Real> local = shifted_pass(x, p.mha1, c.window, 0, capture, layer, 1);
  SwinOutput<Real> shifted = shifted_pass(local.output, p.mha2, c.window, c.shift, capture, layer, 2);

  Var<Real> tokens = shifted.output;
  if (n % 2 != 0) tokens = slice_rows(tokens, 0, n - 1);

  SwinOutput<Real> result;
  result.output = token_merge(tokens, p.merge_w, p.merge_b);
  result.records = std::move(local.records);
  for (AttentionRecord& r : shifted.records) result.records.push_back(std::move(r));
  return result;
}

#define GI_INSTANTIATE_SWIN(Real)                                                                                \
  template SwinOutput<Real> shifted_pass(Var<Real>, const MhaWeights<Var<Real>>&, std::size_t, std::size_t, bool, \
                                         std::size_t, std::size_t);                                               \
  template Var<Real> token_merge(Var<Real>, Var<Real>, Var<Real>);                                               \
  template SwinOutput<Real> swin1d_forward(Var<Real>, const SwinWeights<Var<Real>>&, const Swin1dConfig&, bool,   \
                                           std::size_t);

GI_INSTANTIATE_SWIN(float)
GI_INSTANTIATE_SWIN(double)

}  // namespace gi

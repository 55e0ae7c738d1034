// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gi {
namespace {

Tensor<double> gaussian(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  Tensor<double> t({rows, cols});
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

void expect_shape(const Tensor<double>& t, const Shape& shape, const char* name) {
  if (t.shape() != shape)
    throw DimensionError(std::string("attention parameter ") + name + " has shape " + shape_string(t.shape()) +
                         ", expected " + shape_string(shape));
}

// Plain-loop helpers for the oracle.
Tensor<double> ref_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

Tensor<double> ref_layer_norm(const Tensor<double>& x, const Tensor<double>& gain, const Tensor<double>& bias) {
  Tensor<double> out(x.shape());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mu = 0.0, var = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += x(i, j);
    mu /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * gain[j] + bias[j];
  }
  return out;
}

}  // namespace

MhaParams init_mha(const MhaShape& shape, Rng& rng) {
  const std::size_t d = shape.width;
  if (d == 0 || shape.heads == 0 || d % shape.heads != 0)
    throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(shape.heads) +
                      " heads");
  MhaParams p;
  p.heads = shape.heads;
  p.ln_gain = Tensor<double>({d}, 1.0);
  p.ln_bias = Tensor<double>({d});
  p.wq = gaussian(d, d, d, rng);
  p.wk = gaussian(d, d, d, rng);
  p.wv = gaussian(d, d, d, rng);
  p.wo = gaussian(d, d, d, rng);
  if (shape.rel_bias_span > 0) p.rel_bias = Tensor<double>({2 * shape.rel_bias_span - 1, shape.heads});
  if (shape.ff) {
    FeedForward<Tensor<double>> ff;
    ff.ln_gain = Tensor<double>({d}, 1.0);
    ff.ln_bias = Tensor<double>({d});
    ff.w1 = gaussian(d, 2 * d, d, rng);
    ff.b1 = Tensor<double>({2 * d});
    ff.w2 = gaussian(2 * d, d, 2 * d, rng);
    ff.b2 = Tensor<double>({d});
    p.ff = std::move(ff);
  }
  return p;
}

void validate_mha(const MhaParams& p, std::size_t d) {
  if (p.heads == 0 || d % p.heads != 0)
    throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(p.heads) +
                      " heads");
  expect_shape(p.ln_gain, {d}, "ln_gain");
  expect_shape(p.ln_bias, {d}, "ln_bias");
  expect_shape(p.wq, {d, d}, "wq");
  expect_shape(p.wk, {d, d}, "wk");
  expect_shape(p.wv, {d, d}, "wv");
  expect_shape(p.wo, {d, d}, "wo");
  if (p.rel_bias && (p.rel_bias->rank() != 2 || p.rel_bias->cols() != p.heads || p.rel_bias->rows() % 2 == 0))
    throw DimensionError("relative position table " + shape_string(p.rel_bias->shape()) + " is not (2k-1)x" +
                         std::to_string(p.heads));
  if (p.ff) {
    expect_shape(p.ff->ln_gain, {d}, "ff.ln_gain");
    expect_shape(p.ff->ln_bias, {d}, "ff.ln_bias");
    expect_shape(p.ff->w1, {d, 2 * d}, "ff.w1");
    expect_shape(p.ff->b1, {2 * d}, "ff.b1");
    expect_shape(p.ff->w2, {2 * d, d}, "ff.w2");
    expect_shape(p.ff->b2, {d}, "ff.b2");
  }
}

template <class Real>
MhaOutput<Real> multi_head_attention(const MhaWeights<Var<Real>>& p, Var<Real> x, bool capture) {
  const std::size_t len = x.rows(), d = x.cols();
  if (p.heads == 0 || d % p.heads != 0)
    throw ConfigError("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(p.heads) +
                      " heads");
  if (p.wq.rows() != d)
    throw DimensionError("attention input " + shape_string(x.shape()) + " does not match projection " +
                         shape_string(p.wq.shape()));
  const std::size_t dh = d / p.heads;

  const Var<Real> normed = layer_norm(x, p.ln_gain, p.ln_bias);
  const Var<Real> q = matmul(normed, p.wq);
  const Var<Real> k = matmul(normed, p.wk);
  const Var<Real> v = matmul(normed, p.wv);

  MhaOutput<Real> result;
  if (capture) result.weights.emplace();
  std::vector<Var<Real>> head_out;
  head_out.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Var<Real> qh = q, kh = k, vh = v;
    if (p.heads > 1) {
      qh = slice_cols(q, h * dh, dh);
      kh = slice_cols(k, h * dh, dh);
      vh = slice_cols(v, h * dh, dh);
    }
    std::optional<Var<Real>> bias;
    if (p.rel_bias) bias = relative_position_bias(*p.rel_bias, len, h);
    AttentionResult<Real> att = scaled_dot_attention(qh, kh, vh, bias);
    head_out.push_back(att.output);
    if (capture) result.weights->push_back(att.weights.template cast<double>());
  }
  const Var<Real> merged = p.heads > 1 ? concat_cols(head_out) : head_out.front();
  Var<Real> y = add(x, matmul(merged, p.wo));

  if (p.ff) {
    const Var<Real> hidden = gelu(linear(layer_norm(y, p.ff->ln_gain, p.ff->ln_bias), p.ff->w1, p.ff->b1));
    y = add(y, linear(hidden, p.ff->w2, p.ff->b2));
  }
  result.output = y;
  return result;
}

std::vector<std::size_t> window_lengths(std::size_t n, std::size_t k) {
  if (k == 0) throw ConfigError("window size must be at least 1");
  std::vector<std::size_t> lengths(n / k, k);
  if (n % k != 0) lengths.push_back(n % k);
  return lengths;
}

std::size_t window_square_sum(std::size_t n, std::size_t k) {
  std::size_t total = 0;
  for (std::size_t len : window_lengths(n, k)) total += len * len;
  return total;
}

template <class Real>
std::vector<Var<Real>> window_partition(Var<Real> x, std::size_t k) {
  const std::vector<std::size_t> lengths = window_lengths(x.rows(), k);
  if (lengths.size() == 1) return {x};
  std::vector<Var<Real>> windows;
  windows.reserve(lengths.size());
  std::size_t begin = 0;
  for (std::size_t len : lengths) {
    windows.push_back(slice_rows(x, begin, len));
    begin += len;
  }
  return windows;
}

template <class Real>
Var<Real> window_merge(const std::vector<Var<Real>>& windows) {
  if (windows.size() == 1) return windows.front();
  return concat_rows(windows);
}

Tensor<double> dense_attention_oracle(const Tensor<double>& x, const MhaParams& p) {
  if (x.rank() != 2) throw DimensionError("dense_attention_oracle: expected a matrix, got " + shape_string(x.shape()));
  validate_mha(p, x.cols());
  const std::size_t n = x.rows(), d = x.cols(), heads = p.heads, dh = d / heads;
  std::size_t span = 0;
  if (p.rel_bias) {
    span = (p.rel_bias->rows() + 1) / 2;
    if (n > span)
      throw DimensionError("dense_attention_oracle: " + std::to_string(n) + " tokens exceed relative table span " +
                           std::to_string(span));
  }

  const Tensor<double> normed = ref_layer_norm(x, p.ln_gain, p.ln_bias);
  const Tensor<double> q = ref_matmul(normed, p.wq);
  const Tensor<double> k = ref_matmul(normed, p.wk);
  const Tensor<double> v = ref_matmul(normed, p.wv);

  Tensor<double> heads_out({n, d});
  std::vector<double> logits(n);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        logits[j] = dot / std::sqrt(static_cast<double>(dh));
        if (p.rel_bias) logits[j] += (*p.rel_bias)(j + span - 1 - i, h);
      }
      const double hi = *std::max_element(logits.begin(), logits.end());
      double total = 0.0;
      for (double& l : logits) {
        l = std::exp(l - hi);
        total += l;
      }
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += logits[j] / total * v(j, h * dh + c);
        heads_out(i, h * dh + c) = acc;
      }
    }
  }

  Tensor<double> y = ref_matmul(heads_out, p.wo);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  if (p.ff) {
    const Tensor<double> normed2 = ref_layer_norm(y, p.ff->ln_gain, p.ff->ln_bias);
    Tensor<double> hidden = ref_matmul(normed2, p.ff->w1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2 * d; ++j) {
        const double z = hidden(i, j) + p.ff->b1[j];
        hidden(i, j) = 0.5 * z * (1.0 + std::erf(z * 0.5 * std::numbers::sqrt2));
      }
    const Tensor<double> out = ref_matmul(hidden, p.ff->w2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) y(i, j) += out(i, j) + p.ff->b2[j];
  }
  return y;
}

#define GI_INSTANTIATE_ATTENTION(Real)                                                              \
  template MhaOutput<Real> multi_head_attention(const MhaWeights<Var<Real>>&, Var<Real>, bool);     \
  template std::vector<Var<Real>> window_partition(Var<Real>, std::size_t);                         \
  template Var<Real> window_merge(const std::vector<Var<Real>>&);

GI_INSTANTIATE_ATTENTION(float)
GI_INSTANTIATE_ATTENTION(double)

}  // namespace gi

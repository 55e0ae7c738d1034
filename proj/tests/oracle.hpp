// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain-loop reference implementations used as test oracles. Nothing here
// calls into the tape or the library's forward code.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gi/attention.hpp"
#include "gi/model.hpp"

namespace gi::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor<double>& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline Tensor<double> to_tensor(const Mat& m) {
  Tensor<double> t({m.size(), m.front().size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

inline Mat mm(const Mat& a, const Tensor<double>& b) {
  Mat out(a.size(), std::vector<double>(b.cols(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.rows(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) out[i][j] += a[i][k] * b(k, j);
  return out;
}

inline Mat norm_rows(const Mat& x, const Tensor<double>& g, const Tensor<double>& b) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i].size());
    double mu = 0.0;
    for (double v : x[i]) mu += v;
    mu /= d;
    double var = 0.0;
    for (double v : x[i]) var += (v - mu) * (v - mu);
    var /= d;
    for (std::size_t j = 0; j < x[i].size(); ++j) out[i][j] = (x[i][j] - mu) / std::sqrt(var + 1e-5) * g[j] + b[j];
  }
  return out;
}

/// Attention sublayer on one window, optional position table and feed-forward.
inline Mat mha(const Mat& x, const MhaParams& p) {
  const std::size_t len = x.size(), d = x.front().size(), dh = d / p.heads;
  const Mat h = norm_rows(x, p.ln_gain, p.ln_bias);
  const Mat q = mm(h, p.wq), k = mm(h, p.wk), v = mm(h, p.wv);
  Mat att(len, std::vector<double>(d, 0.0));
  const std::size_t span = p.rel_bias ? (p.rel_bias->rows() + 1) / 2 : 0;
  for (std::size_t head = 0; head < p.heads; ++head)
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> e(len);
      for (std::size_t j = 0; j < len; ++j) {
        double s = 0.0;
        for (std::size_t c = head * dh; c < (head + 1) * dh; ++c) s += q[i][c] * k[j][c];
        s /= std::sqrt(static_cast<double>(dh));
        if (p.rel_bias) s += (*p.rel_bias)(span - 1 + j - i, head);
        e[j] = s;
      }
      const double top = *std::max_element(e.begin(), e.end());
      double z = 0.0;
      for (double& s : e) z += (s = std::exp(s - top));
      for (std::size_t j = 0; j < len; ++j)
        for (std::size_t c = head * dh; c < (head + 1) * dh; ++c) att[i][c] += e[j] / z * v[j][c];
    }
  Mat y = mm(att, p.wo);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i][j] += x[i][j];
  if (!p.ff) return y;
  Mat hid = mm(norm_rows(y, p.ff->ln_gain, p.ff->ln_bias), p.ff->w1);
  for (auto& row : hid)
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double u = row[j] + p.ff->b1[j];
      row[j] = 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2));
    }
  const Mat o = mm(hid, p.ff->w2);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i][j] += o[i][j] + p.ff->b2[j];
  return y;
}

/// Window pass: rotate so row i takes row (i − t) mod n, attend in consecutive
/// windows of k (short last window), rotate back.
inline Mat window_pass(const Mat& x, const MhaParams& p, std::size_t k, std::size_t t) {
  const std::size_t n = x.size();
  Mat r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = x[(i + n - t % n) % n];
  for (std::size_t start = 0; start < n; start += k) {
    const std::size_t stop = std::min(n, start + k);
    Mat w(r.begin() + static_cast<std::ptrdiff_t>(start), r.begin() + static_cast<std::ptrdiff_t>(stop));
    w = mha(w, p);
    std::copy(w.begin(), w.end(), r.begin() + static_cast<std::ptrdiff_t>(start));
  }
  Mat back(n);
  for (std::size_t i = 0; i < n; ++i) back[(i + n - t % n) % n] = r[i];
  return back;
}

inline Mat swin_block(const Mat& x, const Swin1dParams& p, const Swin1dConfig& c) {
  Mat h = window_pass(window_pass(x, p.mha1, c.window, 0), p.mha2, c.window, c.shift);
  const std::size_t pairs = h.size() / 2;
  Mat joined(pairs);
  for (std::size_t j = 0; j < pairs; ++j) {
    joined[j] = h[2 * j];
    joined[j].insert(joined[j].end(), h[2 * j + 1].begin(), h[2 * j + 1].end());
  }
  Mat out = mm(joined, p.merge_w);
  for (auto& row : out)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.merge_b[j];
  return out;
}

inline Tensor<double> model(const InterpreterParams& p, const InterpreterConfig& c, const Tensor<double>& x) {
  Mat h = mm(to_mat(x), p.embed_w);
  for (auto& row : h)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.embed_b[j];
  for (std::size_t l = 0; l < c.layers.size(); ++l) h = swin_block(h, p.swin[l], c.layers[l]);
  const std::size_t drop = (h.size() - c.m) / 2;
  h = Mat(h.begin() + static_cast<std::ptrdiff_t>(drop), h.begin() + static_cast<std::ptrdiff_t>(drop + c.m));
  for (const MhaParams& f : p.final_blocks) h = mha(h, f);
  Mat y = mm(h, p.head_w);
  for (auto& row : y)
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double u = row[j] + p.head_b[j];
      row[j] = c.softplus ? (u > 30 ? u : std::log1p(std::exp(u))) : u;
    }
  return to_tensor(y);
}

/// Input tokens each output token of one block can depend on, by set algebra
/// over the two partitions (no arithmetic involved).
inline std::vector<std::vector<bool>> dependence_sets(std::size_t n, std::size_t k, std::size_t t) {
  auto same_window = [&](std::size_t shift) {
    std::vector<std::vector<bool>> s(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s[i][j] = ((i + shift) % n) / k == ((j + shift) % n) / k;
    return s;
  };
  const auto local = same_window(0), shifted = same_window(t);
  std::vector<std::vector<bool>> token(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (shifted[i][j])
        for (std::size_t src = 0; src < n; ++src) token[i][src] = token[i][src] || local[j][src];
  std::vector<std::vector<bool>> out(n / 2, std::vector<bool>(n, false));
  for (std::size_t o = 0; o < n / 2; ++o)
    for (std::size_t src = 0; src < n; ++src) out[o][src] = token[2 * o][src] || token[2 * o + 1][src];
  return out;
}

}  // namespace gi::oracle

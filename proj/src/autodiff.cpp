// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace gi {
namespace {

template <class Real>
void require_same_tape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape())
    throw ContractError(std::string(op) + ": operands belong to different tapes");
}

template <class Real>
void require_matrix(const Var<Real>& a, const char* op) {
  if (a.value().rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

// C[p×r] += A[p×q] · B[q×r]
template <class Real>
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    Real* ci = c + i * r;
    const Real* ai = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const Real aik = ai[k];
      const Real* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

// C[p×r] += A[p×q] · B[r×q]ᵀ
template <class Real>
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const Real* ai = a + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const Real* bj = b + j * q;
      Real acc = 0;
      for (std::size_t k = 0; k < q; ++k) acc += ai[k] * bj[k];
      c[i * r + j] += acc;
    }
  }
}

// C[q×r] += A[p×q]ᵀ · B[p×r]
template <class Real>
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const Real* ai = a + i * q;
    const Real* bi = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const Real aik = ai[k];
      Real* ck = c + k * r;
      for (std::size_t j = 0; j < r; ++j) ck[j] += aik * bi[j];
    }
  }
}

template <class Real>
void accumulate(Tensor<Real>& into, const Tensor<Real>& from) {
  auto dst = into.data();
  auto src = from.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class Real>
Var<Real> elementwise_unary(Var<Real> x, Real (*f)(Real), Real (*df)(Real)) {
  const Tensor<Real>& xv = x.value();
  Tensor<Real> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, df](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    const Tensor<Real>& xv = tape.value(xi);
    Tensor<Real>& gx = tape.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i]);
  });
}

template <class Real>
Real gelu_value(Real x) {
  return Real(0.5) * x * (Real(1) + std::erf(x * Real(0.5 * std::numbers::sqrt2)));
}

template <class Real>
Real gelu_derivative(Real x) {
  const Real cdf = Real(0.5) * (Real(1) + std::erf(x * Real(0.5 * std::numbers::sqrt2)));
  const Real pdf = std::exp(Real(-0.5) * x * x) * Real(std::numbers::inv_sqrtpi * 0.5 * std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <class Real>
Real softplus_value(Real x) {
  return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class Real>
Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

template <class Real>
Var<Real> Tape<Real>::leaf(Tensor<Real> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
template <class Range>
Var<Real> Tape<Real>::record_impl(Tensor<Real> value, const Range& parents, Backward backward) {
  bool needs = false;
  for (const Var<Real>& p : parents) {
    if (&p.tape() != this) throw ContractError("operand recorded on a different tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs && grad_enabled_;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
Var<Real> Tape<Real>::record(Tensor<Real> value, std::initializer_list<Var<Real>> parents, Backward backward) {
  return record_impl(std::move(value), parents, std::move(backward));
}

template <class Real>
Var<Real> Tape<Real>::record(Tensor<Real> value, const std::vector<Var<Real>>& parents, Backward backward) {
  return record_impl(std::move(value), parents, std::move(backward));
}

template <class Real>
Tensor<Real>& Tape<Real>::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor<Real>(node.value.shape());
  return node.grad;
}

template <class Real>
const Tensor<Real>& Tape<Real>::grad(Var<Real> v) const {
  const Node& node = nodes_.at(v.id());
  if (!node.requires_grad) throw ContractError("gradient requested for a node that does not require one");
  if (node.grad.empty()) throw ContractError("gradient requested before backward()");
  return node.grad;
}

template <class Real>
void Tape<Real>::backward(Var<Real> loss) {
  if (!grad_enabled_) throw ContractError("backward() on a tape recorded without gradients");
  if (&loss.tape() != this) throw ContractError("backward(): loss recorded on a different tape");
  if (loss.size() != 1) throw ContractError("backward(): loss must be a scalar, got shape " + shape_string(loss.shape()));
  if (!nodes_[loss.id()].requires_grad) throw ContractError("backward(): loss does not depend on any gradient-enabled leaf");

  for (Node& node : nodes_) {
    if (node.requires_grad)
      node.grad = Tensor<Real>(node.value.shape());
    else
      node.grad = Tensor<Real>();
  }
  nodes_[loss.id()].grad[0] = Real(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.requires_grad && node.backward) node.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b, MaddKind kind) {
  require_same_tape(a, b, "matmul");
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  if (b.rows() != q)
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " · " +
                         shape_string(b.shape()));
  Tensor<Real> out({p, r});
  gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), p, q, r);
  a.tape().count(kind, static_cast<std::uint64_t>(p) * q * r);
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi, p, q, r](Tape<Real>& tape, std::size_t self) {
    const Real* g = tape.output_grad(self).data().data();
    if (tape.requires_grad(ai))
      gemm_nt(g, tape.value(bi).data().data(), tape.grad_buffer(ai).data().data(), p, r, q);
    if (tape.requires_grad(bi))
      gemm_tn(tape.value(ai).data().data(), g, tape.grad_buffer(bi).data().data(), p, q, r);
  });
}

template <class Real>
Var<Real> transpose(Var<Real> a) {
  require_matrix(a, "transpose");
  const std::size_t n = a.rows(), m = a.cols();
  const Tensor<Real>& av = a.value();
  Tensor<Real> out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = av(i, j);
  const std::size_t ai = a.id();
  return a.tape().record(std::move(out), {a}, [ai, n, m](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& ga = tape.grad_buffer(ai);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += g(j, i);
  });
}

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b, "add");
  if (a.shape() != b.shape())
    throw DimensionError("add: shapes differ, " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<Real> out = a.value();
  accumulate(out, b.value());
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    if (tape.requires_grad(ai)) accumulate(tape.grad_buffer(ai), g);
    if (tape.requires_grad(bi)) accumulate(tape.grad_buffer(bi), g);
  });
}

template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  return add(a, scale(b, Real(-1)));
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b, "mul");
  if (a.shape() != b.shape())
    throw DimensionError("mul: shapes differ, " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor<Real> out = a.value();
  const Tensor<Real>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {a, b}, [ai, bi](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    if (tape.requires_grad(ai)) {
      Tensor<Real>& ga = tape.grad_buffer(ai);
      const Tensor<Real>& bv = tape.value(bi);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(bi)) {
      Tensor<Real>& gb = tape.grad_buffer(bi);
      const Tensor<Real>& av = tape.value(ai);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <class Real>
Var<Real> scale(Var<Real> a, Real factor) {
  Tensor<Real> out = a.value();
  for (Real& v : out.data()) v *= factor;
  const std::size_t ai = a.id();
  return a.tape().record(std::move(out), {a}, [ai, factor](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& ga = tape.grad_buffer(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <class Real>
Var<Real> add_bias(Var<Real> x, Var<Real> bias) {
  require_same_tape(x, bias, "add_bias");
  require_matrix(x, "add_bias");
  const std::size_t n = x.rows(), d = x.cols();
  if (bias.size() != d)
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " + shape_string(x.shape()));
  Tensor<Real> out = x.value();
  const Tensor<Real>& bv = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) += bv[j];
  const std::size_t xi = x.id(), bi = bias.id();
  return x.tape().record(std::move(out), {x, bias}, [xi, bi, n, d](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    if (tape.requires_grad(xi)) accumulate(tape.grad_buffer(xi), g);
    if (tape.requires_grad(bi)) {
      Tensor<Real>& gb = tape.grad_buffer(bi);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gb[j] += g(i, j);
    }
  });
}

template <class Real>
Var<Real> linear(Var<Real> x, Var<Real> weight, Var<Real> bias) {
  return add_bias(matmul(x, weight, MaddKind::Projection), bias);
}

template <class Real>
Var<Real> sum(Var<Real> a) {
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  const std::size_t ai = a.id();
  return a.tape().record(Tensor<Real>::scalar(total), {a}, [ai](Tape<Real>& tape, std::size_t self) {
    const Real g = tape.output_grad(self)[0];
    for (Real& v : tape.grad_buffer(ai).data()) v += g;
  });
}

template <class Real>
Var<Real> mean(Var<Real> a) {
  return scale(sum(a), Real(1) / static_cast<Real>(a.size()));
}

// ---------------------------------------------------------------------------
// Normalisation and nonlinearities

template <class Real>
Var<Real> softmax(Var<Real> x, std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  const Tensor<Real>& xv = x.value();
  Tensor<Real> out(shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      Real hi = xv[base];
      for (std::size_t i = 1; i < len; ++i) hi = std::max(hi, xv[base + i * inner]);
      Real total = 0;
      for (std::size_t i = 0; i < len; ++i) {
        const Real e = std::exp(xv[base + i * inner] - hi);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= total;
    }
  }
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, outer, inner, len](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    const Tensor<Real>& y = tape.value(self);
    Tensor<Real>& gx = tape.grad_buffer(xi);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        Real dot = 0;
        for (std::size_t i = 0; i < len; ++i) dot += g[base + i * inner] * y[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const std::size_t idx = base + i * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

template <class Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gain, Var<Real> bias, Real eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d)
    throw DimensionError("layer_norm: gain/bias of size " + std::to_string(gain.size()) + "/" +
                         std::to_string(bias.size()) + " for last axis " + std::to_string(d));
  const std::size_t rows = x.size() / d;
  const Tensor<Real>& xv = x.value();
  const Tensor<Real>& gv = gain.value();
  const Tensor<Real>& bv = bias.value();

  auto normalized = std::make_shared<std::vector<Real>>(x.size());
  auto inv_std = std::make_shared<std::vector<Real>>(rows);
  Tensor<Real> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = xv.data().data() + r * d;
    Real mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<Real>(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<Real>(d);
    const Real is = Real(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const Real xh = (xr[j] - mu) * is;
      (*normalized)[r * d + j] = xh;
      out[r * d + j] = xh * gv[j] + bv[j];
    }
  }
  const std::size_t xi = x.id(), gi = gain.id(), bi = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [xi, gi, bi, rows, d, normalized, inv_std](Tape<Real>& tape, std::size_t self) {
        const Tensor<Real>& g = tape.output_grad(self);
        const Tensor<Real>& gv = tape.value(gi);
        const std::vector<Real>& xh = *normalized;
        if (tape.requires_grad(gi)) {
          Tensor<Real>& gg = tape.grad_buffer(gi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xh[r * d + j];
        }
        if (tape.requires_grad(bi)) {
          Tensor<Real>& gb = tape.grad_buffer(bi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
        if (tape.requires_grad(xi)) {
          Tensor<Real>& gx = tape.grad_buffer(xi);
          for (std::size_t r = 0; r < rows; ++r) {
            Real mean_dxh = 0, mean_dxh_xh = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Real dxh = g[r * d + j] * gv[j];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xh[r * d + j];
            }
            mean_dxh /= static_cast<Real>(d);
            mean_dxh_xh /= static_cast<Real>(d);
            const Real is = (*inv_std)[r];
            for (std::size_t j = 0; j < d; ++j) {
              const Real dxh = g[r * d + j] * gv[j];
              gx[r * d + j] += is * (dxh - mean_dxh - xh[r * d + j] * mean_dxh_xh);
            }
          }
        }
      });
}

template <class Real>
Var<Real> gelu(Var<Real> x) {
  return elementwise_unary<Real>(x, &gelu_value<Real>, &gelu_derivative<Real>);
}

template <class Real>
Var<Real> softplus(Var<Real> x) {
  return elementwise_unary<Real>(x, &softplus_value<Real>, &sigmoid<Real>);
}

// ---------------------------------------------------------------------------
// Token rearrangement

template <class Real>
Var<Real> roll(Var<Real> x, std::ptrdiff_t t) {
  require_matrix(x, "roll");
  const std::size_t n = x.rows(), d = x.cols();
  const auto sn = static_cast<std::ptrdiff_t>(n);
  const std::size_t shift = static_cast<std::size_t>(((t % sn) + sn) % sn);
  const Tensor<Real>& xv = x.value();
  Tensor<Real> out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = (i + n - shift) % n;
    std::copy_n(xv.data().data() + src * d, d, out.data().data() + i * d);
  }
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, n, d, shift](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& gx = tape.grad_buffer(xi);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = (i + n - shift) % n;
      for (std::size_t j = 0; j < d; ++j) gx[src * d + j] += g[i * d + j];
    }
  });
}

template <class Real>
Var<Real> concat_pairs(Var<Real> x) {
  require_matrix(x, "concat_pairs");
  const std::size_t n = x.rows(), d = x.cols();
  if (n % 2 != 0) throw ContractError("concat_pairs: token count " + std::to_string(n) + " is odd");
  // Row-major storage makes the pairwise concatenation a reshape.
  Tensor<Real> out({n / 2, 2 * d}, x.value().values());
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi](Tape<Real>& tape, std::size_t self) {
    accumulate(tape.grad_buffer(xi), tape.output_grad(self));
  });
}

template <class Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t d = x.cols();
  if (count == 0 || begin + count > x.rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_string(x.shape()));
  const auto first = x.value().data().begin() + static_cast<std::ptrdiff_t>(begin * d);
  Tensor<Real> out({count, d}, std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(count * d)));
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, begin, d](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& gx = tape.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * d + i] += g[i];
  });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t d = parts.front().cols();
  std::size_t n = 0;
  for (const Var<Real>& p : parts) {
    require_matrix(p, "concat_rows");
    require_same_tape(parts.front(), p, "concat_rows");
    if (p.cols() != d)
      throw DimensionError("concat_rows: width " + std::to_string(p.cols()) + " differs from " + std::to_string(d));
    n += p.rows();
  }
  std::vector<Real> data;
  data.reserve(n * d);
  std::vector<std::size_t> ids;
  for (const Var<Real>& p : parts) {
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    ids.push_back(p.id());
  }
  return parts.front().tape().record(Tensor<Real>({n, d}, std::move(data)), parts,
                                     [ids](Tape<Real>& tape, std::size_t self) {
                                       const Tensor<Real>& g = tape.output_grad(self);
                                       std::size_t offset = 0;
                                       for (std::size_t id : ids) {
                                         const std::size_t len = tape.value(id).size();
                                         if (tape.requires_grad(id)) {
                                           Tensor<Real>& gp = tape.grad_buffer(id);
                                           for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
                                         }
                                         offset += len;
                                       }
                                     });
}

template <class Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (count == 0 || begin + count > d)
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_string(x.shape()));
  const Tensor<Real>& xv = x.value();
  Tensor<Real> out({n, count});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = xv(i, begin + j);
  const std::size_t xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, begin, n, count](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& gx = tape.grad_buffer(xi);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < count; ++j) gx(i, begin + j) += g(i, j);
  });
}

template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const std::size_t n = parts.front().rows();
  std::size_t d = 0;
  for (const Var<Real>& p : parts) {
    require_matrix(p, "concat_cols");
    require_same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != n)
      throw DimensionError("concat_cols: row count " + std::to_string(p.rows()) + " differs from " + std::to_string(n));
    d += p.cols();
  }
  Tensor<Real> out({n, d});
  std::vector<std::size_t> ids;
  std::size_t offset = 0;
  for (const Var<Real>& p : parts) {
    const Tensor<Real>& pv = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    offset += pv.cols();
    ids.push_back(p.id());
  }
  return parts.front().tape().record(std::move(out), parts, [ids, n](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t w = tape.value(id).cols();
      if (tape.requires_grad(id)) {
        Tensor<Real>& gp = tape.grad_buffer(id);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, offset + j);
      }
      offset += w;
    }
  });
}

template <class Real>
Var<Real> relative_position_bias(Var<Real> table, std::size_t length, std::size_t head) {
  require_matrix(table, "relative_position_bias");
  const std::size_t rows = table.rows(), heads = table.cols();
  if (rows % 2 == 0) throw DimensionError("relative_position_bias: table must have 2k-1 rows, got " + std::to_string(rows));
  const std::size_t k = (rows + 1) / 2;
  if (length > k || head >= heads)
    throw DimensionError("relative_position_bias: length " + std::to_string(length) + " / head " +
                         std::to_string(head) + " outside table " + shape_string(table.shape()));
  const Tensor<Real>& tv = table.value();
  Tensor<Real> out({length, length});
  for (std::size_t i = 0; i < length; ++i)
    for (std::size_t j = 0; j < length; ++j) out(i, j) = tv(j + k - 1 - i, head);
  const std::size_t ti = table.id();
  return table.tape().record(std::move(out), {table}, [ti, length, head, k](Tape<Real>& tape, std::size_t self) {
    const Tensor<Real>& g = tape.output_grad(self);
    Tensor<Real>& gt = tape.grad_buffer(ti);
    for (std::size_t i = 0; i < length; ++i)
      for (std::size_t j = 0; j < length; ++j) gt(j + k - 1 - i, head) += g(i, j);
  });
}

template <class Real>
AttentionResult<Real> scaled_dot_attention(Var<Real> q, Var<Real> k, Var<Real> v, std::optional<Var<Real>> bias) {
  require_same_tape(q, k, "scaled_dot_attention");
  require_same_tape(q, v, "scaled_dot_attention");
  require_matrix(q, "scaled_dot_attention");
  const std::size_t len = q.rows(), dh = q.cols();
  if (k.shape() != q.shape() || v.shape() != q.shape())
    throw DimensionError("scaled_dot_attention: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) +
                         ", v " + shape_string(v.shape()) + " must match");
  if (bias) {
    require_same_tape(q, *bias, "scaled_dot_attention");
    if (bias->shape() != Shape{len, len})
      throw DimensionError("scaled_dot_attention: bias " + shape_string(bias->shape()) + " for length " +
                           std::to_string(len));
  }
  const Real inv_scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  const Real* qp = q.value().data().data();
  const Real* kp = k.value().data().data();
  const Real* vp = v.value().data().data();

  Tensor<Real> weights({len, len});
  gemm_nt(qp, kp, weights.data().data(), len, dh, len);
  for (std::size_t i = 0; i < len; ++i) {
    Real* wr = weights.data().data() + i * len;
    for (std::size_t j = 0; j < len; ++j) {
      wr[j] *= inv_scale;
      if (bias) wr[j] += bias->value()(i, j);
    }
    Real hi = wr[0];
    for (std::size_t j = 1; j < len; ++j) hi = std::max(hi, wr[j]);
    Real total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      wr[j] = std::exp(wr[j] - hi);
      total += wr[j];
    }
    for (std::size_t j = 0; j < len; ++j) wr[j] /= total;
  }
  Tensor<Real> out({len, dh});
  gemm_nn(weights.data().data(), vp, out.data().data(), len, len, dh);

  Tape<Real>& tape = q.tape();
  tape.count(MaddKind::Score, static_cast<std::uint64_t>(len) * len * dh);
  tape.count(MaddKind::Mix, static_cast<std::uint64_t>(len) * len * dh);

  std::vector<Var<Real>> parents{q, k, v};
  if (bias) parents.push_back(*bias);
  const std::size_t qi = q.id(), ki = k.id(), vi = v.id();
  const std::optional<std::size_t> bi = bias ? std::optional<std::size_t>(bias->id()) : std::nullopt;
  auto saved = std::make_shared<Tensor<Real>>(weights);
  Var<Real> output = tape.record(
      std::move(out), parents, [qi, ki, vi, bi, len, dh, inv_scale, saved](Tape<Real>& tape, std::size_t self) {
        const Real* g = tape.output_grad(self).data().data();
        const Real* a = saved->data().data();
        if (tape.requires_grad(vi)) gemm_tn(a, g, tape.grad_buffer(vi).data().data(), len, len, dh);
        // dA = dO · vᵀ, then through the row softmax.
        std::vector<Real> ds(len * len, Real(0));
        gemm_nt(g, tape.value(vi).data().data(), ds.data(), len, dh, len);
        for (std::size_t i = 0; i < len; ++i) {
          Real dot = 0;
          for (std::size_t j = 0; j < len; ++j) dot += ds[i * len + j] * a[i * len + j];
          for (std::size_t j = 0; j < len; ++j) ds[i * len + j] = a[i * len + j] * (ds[i * len + j] - dot);
        }
        if (bi && tape.requires_grad(*bi)) {
          Tensor<Real>& gb = tape.grad_buffer(*bi);
          for (std::size_t i = 0; i < len * len; ++i) gb[i] += ds[i];
        }
        for (Real& x : ds) x *= inv_scale;
        if (tape.requires_grad(qi))
          gemm_nn(ds.data(), tape.value(ki).data().data(), tape.grad_buffer(qi).data().data(), len, len, dh);
        if (tape.requires_grad(ki))
          gemm_tn(ds.data(), tape.value(qi).data().data(), tape.grad_buffer(ki).data().data(), len, len, dh);
      });
  return {output, std::move(weights)};
}

// ---------------------------------------------------------------------------

#define GI_INSTANTIATE_AUTODIFF(Real)                                                                       \
  template class Tape<Real>;                                                                                \
  template Var<Real> matmul(Var<Real>, Var<Real>, MaddKind);                                                \
  template Var<Real> transpose(Var<Real>);                                                                  \
  template Var<Real> add(Var<Real>, Var<Real>);                                                             \
  template Var<Real> sub(Var<Real>, Var<Real>);                                                             \
  template Var<Real> mul(Var<Real>, Var<Real>);                                                             \
  template Var<Real> scale(Var<Real>, Real);                                                                \
  template Var<Real> add_bias(Var<Real>, Var<Real>);                                                        \
  template Var<Real> linear(Var<Real>, Var<Real>, Var<Real>);                                               \
  template Var<Real> sum(Var<Real>);                                                                        \
  template Var<Real> mean(Var<Real>);                                                                       \
  template Var<Real> softmax(Var<Real>, std::size_t);                                                       \
  template Var<Real> layer_norm(Var<Real>, Var<Real>, Var<Real>, Real);                                     \
  template Var<Real> gelu(Var<Real>);                                                                       \
  template Var<Real> softplus(Var<Real>);                                                                   \
  template Var<Real> roll(Var<Real>, std::ptrdiff_t);                                                       \
  template Var<Real> concat_pairs(Var<Real>);                                                               \
  template Var<Real> slice_rows(Var<Real>, std::size_t, std::size_t);                                       \
  template Var<Real> concat_rows(const std::vector<Var<Real>>&);                                            \
  template Var<Real> slice_cols(Var<Real>, std::size_t, std::size_t);                                       \
  template Var<Real> concat_cols(const std::vector<Var<Real>>&);                                            \
  template Var<Real> relative_position_bias(Var<Real>, std::size_t, std::size_t);                           \
  template AttentionResult<Real> scaled_dot_attention(Var<Real>, Var<Real>, Var<Real>, std::optional<Var<Real>>);

GI_INSTANTIATE_AUTODIFF(float)
GI_INSTANTIATE_AUTODIFF(double)

}  // namespace gi

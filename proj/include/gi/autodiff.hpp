// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape owns every value produced during a computation. Operations append a
// node holding the output value plus a closure that pushes the output gradient
// back to the node's parents. Nodes are appended in evaluation order, so
// replaying the tape backwards is a valid topological order.
//
// The tape also counts scalar multiply-adds for the three product kinds that
// dominate attention cost: dense projections, attention scores (Q K^T) and the
// attention-weighted sum of values. Elementwise work is not counted. Only
// forward evaluation increments the counters.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "gi/tensor.hpp"

namespace gi {

enum class MaddKind : std::size_t { Projection = 0, Score = 1, Mix = 2 };

template <class Real>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<Real>& value() const { return tape_->value(id_); }
  const Tensor<Real>& grad() const { return tape_->grad(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }

  Tape<Real>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class Real>
class Tape {
 public:
  /// Called with the tape and the node's own id once its gradient is final.
  using Backward = std::function<void(Tape&, std::size_t)>;

  /// With grad_enabled = false no closures are stored and backward() is refused.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> leaf(Tensor<Real> value, bool requires_grad = true);
  Var<Real> constant(Tensor<Real> value) { return leaf(std::move(value), false); }

  /// Appends the result of a primitive. The closure is dropped when no parent needs a gradient.
  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> parents, Backward backward);
  Var<Real> record(Tensor<Real> value, const std::vector<Var<Real>>& parents, Backward backward);

  /// Reverse sweep from a scalar loss. Gradients are reset first, so repeated calls agree.
  void backward(Var<Real> loss);

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() for a node that requires one.
  const Tensor<Real>& grad(Var<Real> v) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator for a parent, zero-initialised on first use. For Backward closures.
  Tensor<Real>& grad_buffer(std::size_t id);
  const Tensor<Real>& output_grad(std::size_t id) const { return nodes_[id].grad; }

  void count(MaddKind kind, std::uint64_t madds) { madds_[static_cast<std::size_t>(kind)] += madds; }
  std::uint64_t madds() const { return madds_[0] + madds_[1] + madds_[2]; }
  std::uint64_t madds(MaddKind kind) const { return madds_[static_cast<std::size_t>(kind)]; }

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    Backward backward;
  };

  template <class Range>
  Var<Real> record_impl(Tensor<Real> value, const Range& parents, Backward backward);

  std::deque<Node> nodes_;
  std::array<std::uint64_t, 3> madds_{};
  bool grad_enabled_;
};

// Primitive operations. Every operation checks that operands share one tape.

/// p×q · q×r. Adds p·q·r to the tape counter under `kind`.
template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b, MaddKind kind = MaddKind::Projection);
template <class Real>
Var<Real> transpose(Var<Real> a);
template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b);
template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b);
/// Elementwise product.
template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b);
template <class Real>
Var<Real> scale(Var<Real> a, Real factor);
/// Adds a length-d vector to every row of an n×d matrix.
template <class Real>
Var<Real> add_bias(Var<Real> x, Var<Real> bias);
/// x·W + b, with W d_in×d_out counted as a projection.
template <class Real>
Var<Real> linear(Var<Real> x, Var<Real> weight, Var<Real> bias);
template <class Real>
Var<Real> sum(Var<Real> a);
template <class Real>
Var<Real> mean(Var<Real> a);

/// Max-shifted softmax along `axis`.
template <class Real>
Var<Real> softmax(Var<Real> x, std::size_t axis);
/// Normalises each slice along the last axis, then applies gain and bias.
template <class Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gain, Var<Real> bias, Real eps = Real(1e-5));
/// Exact GELU, 0.5·x·(1 + erf(x/√2)).
template <class Real>
Var<Real> gelu(Var<Real> x);
/// log(1 + e^x), evaluated without overflow.
template <class Real>
Var<Real> softplus(Var<Real> x);

/// Cyclic row shift: output row i is input row (i − t) mod n. Negative t inverts.
template <class Real>
Var<Real> roll(Var<Real> x, std::ptrdiff_t t);
/// n×d → (n/2)×2d; output row j is rows 2j and 2j+1 side by side. n must be even.
template <class Real>
Var<Real> concat_pairs(Var<Real> x);
template <class Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count);
template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts);
template <class Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count);
template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts);

/// Expands a (2k−1)×H relative offset table into an L×L bias for one head:
/// entry (i, j) reads table row (j − i) + (k − 1). Requires L ≤ k.
template <class Real>
Var<Real> relative_position_bias(Var<Real> table, std::size_t length, std::size_t head);

/// Result of one head of scaled dot-product attention.
template <class Real>
struct AttentionResult {
  Var<Real> output;
  Tensor<Real> weights;
};

/// softmax(q·kᵀ/√d_head + bias)·v as a single primitive. Counts L·L·d_head
/// score and L·L·d_head mix multiply-adds.
template <class Real>
AttentionResult<Real> scaled_dot_attention(Var<Real> q, Var<Real> k, Var<Real> v,
                                           std::optional<Var<Real>> bias = std::nullopt);

}  // namespace gi

// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "gi/error.hpp"

namespace gi {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor. A plain value: copying copies the data.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      throw DimensionError("tensor data has " + std::to_string(data_.size()) + " values, shape " +
                           shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> data) {
    return Tensor({rows, cols}, std::move(data));
  }
  static Tensor scalar(Real v) { return Tensor({1}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Leading extent of a rank-2 tensor.
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.size() == 1 ? 1 : shape_.at(1); }

  std::span<const Real> data() const { return data_; }
  std::span<Real> data() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }
  Real& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const Real& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<const Real> row(std::size_t r) const { return std::span<const Real>(data_).subspan(r * cols(), cols()); }
  std::span<Real> row(std::size_t r) { return std::span<Real>(data_).subspan(r * cols(), cols()); }

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (std::size_t extent : shape_)
      if (extent == 0) throw DimensionError("tensor shape " + shape_string(shape_) + " has a zero extent");
  }

  Shape shape_;
  std::vector<Real> data_;
};

}  // namespace gi

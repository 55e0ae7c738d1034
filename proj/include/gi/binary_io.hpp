// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitives shared by the dataset container, checkpoints and
// attention exports.
//
// Matrix block layout (used everywhere a matrix is stored):
//   u64 rows, u64 cols, rows·cols × f64, row-major.
// All integers are unsigned 64-bit little-endian; reals are IEEE-754 binary64
// little-endian.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gi/tensor.hpp"

namespace gi {

/// 64-bit FNV-1a, used as the dataset payload checksum.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ULL;
    }
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    hash_.update(data, size);
  }
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void string(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void matrix(const Tensor<double>& t) {
    u64(t.rows());
    u64(t.size() / t.rows());
    for (double v : t.data()) f64(v);
  }

  std::uint64_t checksum() const { return hash_.digest(); }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
  Fnv1a hash_;
};

/// Reads the layouts written by BinaryWriter. Short reads throw
/// FormatError(TruncatedPayload).
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size)
      throw FormatError(FormatErrorCode::TruncatedPayload, "unexpected end of binary payload");
    hash_.update(data, size);
  }
  std::uint64_t u64() {
    unsigned char buf[8];
    bytes(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string string(std::size_t max_size = 1 << 20) {
    const std::uint64_t size = u64();
    if (size > max_size) throw FormatError(FormatErrorCode::Inconsistent, "string length out of range");
    std::string s(size, '\0');
    bytes(s.data(), size);
    return s;
  }
  /// Reads a matrix block; zero dimensions or absurd sizes are format errors.
  Tensor<double> matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32))
      throw FormatError(FormatErrorCode::Inconsistent,
                        "matrix block has invalid shape " + std::to_string(rows) + "x" + std::to_string(cols));
    std::vector<double> data(rows * cols);
    for (double& v : data) v = f64();
    return Tensor<double>({rows, cols}, std::move(data));
  }

  std::uint64_t checksum() const { return hash_.digest(); }
  void reset_checksum() { hash_ = Fnv1a(); }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  Fnv1a hash_;
};

}  // namespace gi

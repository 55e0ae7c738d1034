// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration violates an invariant (window sizes, width chain, fractions, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerical domain violation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Malformed text input; position is the zero-based character offset.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

enum class FormatErrorCode { BadMagic, VersionMismatch, TruncatedPayload, ChecksumMismatch, Inconsistent };

/// Binary container could not be decoded.
class FormatError : public Error {
 public:
  FormatError(FormatErrorCode code, const std::string& what) : Error(what), code_(code) {}
  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace gi

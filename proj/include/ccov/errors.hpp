#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccov {

/// Operand shapes disagree (vector length vs. matrix dimension, etc.).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The bias-correction coefficients have a zero denominator.
class SingularCoefficientError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or truncated input file. `offset` is the byte position where
/// decoding failed, or -1 when unknown.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (at byte offset " + std::to_string(offset) + ")"
                                       : what),
        offset_(offset) {}

  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::int64_t offset_;
};

}  // namespace ccov

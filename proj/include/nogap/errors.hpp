#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nogap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unsupported configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or corrupted file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition that is not about shapes.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Unknown identifier (tape node, parameter name, ...).
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during a computation.
class NumericError : public Error {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  explicit NumericError(const std::string& what, std::size_t sample_index = kNoIndex)
      : Error(what), sample_index_(sample_index) {}

  /// Offending sample, or kNoIndex when the failure is not tied to one.
  std::size_t sample_index() const noexcept { return sample_index_; }

 private:
  std::size_t sample_index_;
};

}  // namespace nogap

#pragma once

#include <stdexcept>
#include <string>

namespace qtraj {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operator/state dimensions disagree or are below the minimum of 2.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The truncated Fock basis cannot represent the requested state or evolution.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Jump probability per step exceeded the cap; the caller must reduce dt.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Generating function evaluated at or beyond a pole.
class DivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Conditional expectation requested on a zero conditional state.
class UndefinedConditionalError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Invalid run configuration or command line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qtraj

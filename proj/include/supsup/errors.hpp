#pragma once

#include <stdexcept>
#include <string>

namespace supsup {

/// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (bad layer sizes, out-of-range hyperparameters, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (labels out of range, IDX parse failures, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object that is not ready for it (empty bank, empty store).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Serialized bytes that do not match the expected container layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configured resource cap would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace supsup

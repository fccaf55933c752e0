#pragma once

#include <stdexcept>
#include <string>

namespace snn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or geometry.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain an operation accepts.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an API precondition (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace snn

#pragma once

#include <stdexcept>
#include <string>

namespace physio {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor operands with incompatible extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value or domain object violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine hit its cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace physio

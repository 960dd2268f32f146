#pragma once

#include <stdexcept>
#include <string>

namespace orthovae {

/// Input with inconsistent dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine failed to converge or produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix lacks the rank (or definiteness) an operation needs. Callers
/// that own a degeneracy policy catch this one specifically.
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed configuration or file contents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace orthovae

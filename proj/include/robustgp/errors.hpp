#pragma once

#include <stdexcept>

namespace robustgp {

/// Invalid configuration or argument (dimension mismatch, bad ranges, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (factorization breakdown, non-finite objective, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File system / parsing failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace robustgp

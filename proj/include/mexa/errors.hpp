#pragma once

#include <stdexcept>
#include <string>

namespace mexa {

/// Operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A reduction or softmax has no valid (unmasked) positions.
class DegenerateMaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hyperparameter or configuration value is out of range or unknown.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mexa

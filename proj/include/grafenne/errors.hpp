#pragma once

#include <stdexcept>
#include <string>

namespace grafenne {

// Shape disagreement between operands of a tensor op.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (files, graphs, deltas).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A delta or mutation that references elements that do not exist.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid experiment or model configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace grafenne

#pragma once

#include <stdexcept>
#include <string>

namespace hgemm {

// Operand shapes do not compose (A is m x k, B is k x n, C is m x n).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The output view overlaps one of the operands.
class AliasError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A problem does not fit the staging buffers of an engine.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Engine registry, policy or benchmark configuration is invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hgemm

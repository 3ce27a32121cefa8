#pragma once

#include <stdexcept>
#include <string>

namespace strange {

/// Tensor or vector shapes that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API was called out of order or with a precondition violated.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed data handed to a container (episodes, layouts).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration: unknown keys, syntax errors, out-of-range values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File reading/writing failures, including corrupted checkpoints.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace strange

#pragma once

#include <stdexcept>
#include <string>

namespace meltpool {

/// Invalid model input: a violated invariant on a curve, source, grid or config.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Config schema violation. `field()` is the dotted path of the offending key.
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidInput(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Nonlinear or linear solver failure that survived all fallbacks.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric could not be extracted (for example a missing isotherm in the wake).
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reference-data fetch failures: offline with a cold cache, or a hash mismatch.
class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace meltpool

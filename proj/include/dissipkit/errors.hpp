#pragma once

#include <stdexcept>
#include <string>

namespace dissipkit {

/// Malformed arguments: dimension mismatches, empty inputs, non-symmetric matrices.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid configuration values or schema violations.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Linear-algebra failures (factorization of a system that should be definite).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// A simulated trajectory left its numerical domain.
class SimulationError : public std::runtime_error {
 public:
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dissipkit

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bp {

// Base error for everything raised by the library. The C API and the CLI
// distinguish config/usage problems (exit 2) from runtime failures (exit 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/graph shape contract violations. Messages name the offending node.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values, diverged training, domain violations of a loss.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// API misuse: backward before forward, transition called twice, bracketed
// loss terms in the wrong phase, invalid labels.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Bad config file, unknown keys, malformed values, bad CLI arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace bp

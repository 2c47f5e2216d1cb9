#pragma once

#include <stdexcept>
#include <string>

namespace dgro {

/// Invalid argument values (bad token index, beta <= 0, p outside (0,1], ...).
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid configuration (unknown scheme name, G < 2, beta1 <= 0, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Exact enumeration would exceed the configured state/response cap.
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value reached a computation that requires finite inputs.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dgro

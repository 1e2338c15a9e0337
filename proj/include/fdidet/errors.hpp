#pragma once

#include <stdexcept>
#include <string>

namespace fdidet {

// Bad user input: malformed config, invalid parameter ranges, dimension
// mismatches. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failure: Riccati divergence, indefinite covariance.
// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fdidet

#pragma once

#include <stdexcept>
#include <string>

namespace numkit {

// Bad user input: malformed config, missing file, inconsistent data.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure: non-finite values, shape mismatch, divergence.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A proven invariant was observed to fail; indicates an implementation bug.
struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace numkit

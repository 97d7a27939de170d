#pragma once

#include <stdexcept>
#include <string>

namespace oscfield {

// Thrown when an input file or configuration document is malformed.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when observation or grid data violates its contract
// (non-monotone times, point outside the domain, mismatched counts).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces nonfinite values or a singular
// system. Carries the diagnostic in the message; never clamps silently.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oscfield

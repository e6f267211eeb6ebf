#pragma once

#include <stdexcept>
#include <string>

namespace reat {

// Bad settings, malformed config files, checkpoint/config shape mismatches.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required file or artifact is absent or unreadable.
struct MissingInputError : std::runtime_error {
    explicit MissingInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values, invalid shapes at run time, numeric preconditions.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace reat

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace topicbp {

// Invalid run configuration (bad flag combinations, out-of-range settings).
// CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File/format problems: unreadable paths, malformed lines, mismatched shapes.
// CLI maps this to exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or other numerical faults detected mid-computation.
// CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace topicbp

#pragma once

#include <stdexcept>
#include <string>

namespace crawl {

// Error taxonomy mirrored by the C API status codes and CLI exit codes.
struct InvalidArgument : std::runtime_error {
    explicit InvalidArgument(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or diverging optimization.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Work or state space exceeds a configured budget.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crawl

#pragma once

#include <stdexcept>
#include <string>

namespace samt {

// Error categories map 1:1 onto CLI exit codes: validation -> 2,
// feasibility -> 3, I/O -> 4.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FeasibilityError : std::runtime_error {
    explicit FeasibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace samt

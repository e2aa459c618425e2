#pragma once

#include <stdexcept>
#include <string>

namespace coarse {

// Bad user input: malformed files, unusable arguments, preconditions the
// caller can fix. CLI maps this to exit code 2.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// A certificate failed to verify: the computed object violates a property
// the construction is supposed to guarantee. CLI maps this to exit code 1.
struct certificate_error : std::runtime_error {
    explicit certificate_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace coarse

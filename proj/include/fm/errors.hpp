#pragma once

#include <stdexcept>
#include <string>

namespace fm {

// Bad user-supplied data: shapes, ranges, violated admissibility constraints.
// The CLI maps this to exit code 1.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A cross-check against the brute-force reference path exceeded its allowed
// deviation. CLI exit code 2.
struct verification_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A request would leave the intended resource envelope (the exact Fock-space
// path grows as 4^m and is deliberately guarded). CLI exit code 3.
struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fm

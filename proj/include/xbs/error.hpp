#pragma once

#include <stdexcept>
#include <string>

namespace xbs {

/// Bad input: violated precondition, malformed file, invalid config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The numerics refused or failed: stability bound, non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace detail

}  // namespace xbs

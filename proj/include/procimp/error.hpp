#pragma once

#include <stdexcept>
#include <string>

namespace procimp {

/// Bad input: malformed config, data, or arguments that violate a precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (factorization, optimizer non-convergence, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace procimp

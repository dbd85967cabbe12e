#pragma once

#include <stdexcept>
#include <string>

namespace chaoscorr {

// Bad arguments: wrong sizes, indices out of range, malformed tuples.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inputs that are well-formed but violate a mathematical precondition
// (non-Hermitian operator, nonzero DE average, corrupted cache file).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChecksumError : ValidationError {
  using ValidationError::ValidationError;
};

// Solver breakdown, fit non-convergence, rejection sampling exhausted.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A function was evaluated outside the region where it is defined
// (e.g. log of an envelope that crosses zero).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

} // namespace chaoscorr

#pragma once

#include <stdexcept>
#include <string>

namespace bceid {

/// Raised when an argument lies outside the domain an operation accepts
/// (off-grid bids, malformed supports, bad tolerances).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the LP solver when it cannot certify a status (singular basis,
/// iteration limit). A solver error never masquerades as infeasibility.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files; the message carries the file line number.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bceid

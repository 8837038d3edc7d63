#pragma once

#include <stdexcept>
#include <string>

namespace qdstrain {

/// Malformed or out-of-contract input (bad grid, too few points, schema violations).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A formula evaluated outside its domain, e.g. a relative error of a zero shift.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The model produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdstrain

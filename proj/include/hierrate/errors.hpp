#pragma once

#include <stdexcept>
#include <string>

namespace hierrate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data violates a portfolio or file-format rule.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A moment estimator has a vanishing denominator (too few industries,
/// branches or repeated observations).
class DegenerateHierarchyError : public DataError {
 public:
  using DataError::DataError;
};

/// Numerical failure: rank collapse, non-finite iterates, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hierrate

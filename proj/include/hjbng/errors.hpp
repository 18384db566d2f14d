#pragma once

#include <stdexcept>
#include <string>

namespace hjbng {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// u_xx too close to zero for the optimal-control quotient to be trusted.
class SingularHessian : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class CflViolation : public Error {
 public:
  using Error::Error;
};

/// Two solutions cannot be compared on the requested grid.
class DomainMismatch : public Error {
 public:
  using Error::Error;
};

/// A k > 0 position was requested for a market without non-tradable assets.
class InvalidBranch : public Error {
 public:
  using Error::Error;
};

class NoSignChange : public Error {
 public:
  using Error::Error;
};

class InvalidParameters : public Error {
 public:
  using Error::Error;
};

}  // namespace hjbng

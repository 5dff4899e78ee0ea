#pragma once

#include <stdexcept>
#include <string>

namespace regcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a function (e.g. t outside [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operands have incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A normal-equations system is numerically singular.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or another unrecoverable numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A configuration or input file is invalid.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace regcp

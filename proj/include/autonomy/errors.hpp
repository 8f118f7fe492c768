#pragma once

#include <stdexcept>
#include <string>

namespace autonomy {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A truncation dimension or subblock size is out of range.
class InvalidDimension : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Floating point breakdown: overflow, norm collapse, negative probability.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A truncated representation lost too much mass.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A measurement record is inconsistent with its instrument parameters.
class InvalidRecord : public Error {
 public:
  using Error::Error;
};

/// A spatial grid or quadrature does not cover the support of its integrand.
class ExtentError : public Error {
 public:
  using Error::Error;
};

/// Incompatible specifications, e.g. histograms with different bins.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Statistics requested on empty data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace autonomy

#pragma once

#include <stdexcept>
#include <string>

namespace psr {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point lies outside [0,1)^3 by more than one periodic wrap.
struct DomainError : Error {
  using Error::Error;
};

/// The indicator normalization hit a near-zero corner value; the shape is
/// indistinct at the domain corner and the scale division is ill-posed.
struct DegenerateScaleError : Error {
  using Error::Error;
};

/// Malformed input file content.
struct ParseError : Error {
  using Error::Error;
};

/// Filesystem or stream failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace psr

#pragma once

#include <stdexcept>
#include <string>

namespace lamp {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document, config file or meta-path string.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid data: dangling references, type mismatches,
// mismatched node universes, unknown ids.
class DataError : public Error {
 public:
  using Error::Error;
};

// Tensor shape or dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a forward value or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A computation would exceed an explicit resource budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Invalid argument to an operation (out-of-range hyper-parameter etc).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace lamp

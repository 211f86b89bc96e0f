#pragma once

#include <stdexcept>
#include <string>

namespace nams {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or shapes: a caller contract was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, divergence, or an optimizer that cannot continue.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration / input files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File system or serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nams

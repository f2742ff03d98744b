#pragma once

#include <stdexcept>
#include <string>

namespace gpcde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of arguments do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced, failed factorization, or a natural-gradient step that
/// leaves the Gaussian family.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A model file written by an incompatible format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A model file whose checksum does not match its contents.
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpcde

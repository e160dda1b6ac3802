#pragma once

#include <stdexcept>
#include <string>

namespace ccqt {

// Base class for every error raised by the library. Subclasses name the
// failing contract so callers (and the CLI) can map them to diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MalformedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientAudioError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccqt

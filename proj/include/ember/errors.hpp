#pragma once

#include <stdexcept>
#include <string>

namespace ember {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or axes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value outside the domain of an operation (log of a nonpositive number, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An object used in a state that does not allow the call (backward twice, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

/// File system or serialization failure; the message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ember

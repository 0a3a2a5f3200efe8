#pragma once

#include <stdexcept>
#include <string>

namespace robogrid {

// Root of the toolkit's exception hierarchy. Callers that only care about
// "something went wrong in robogrid" catch this; the CLI maps subclasses to
// exit codes and messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied value violates a precondition (bad dimensions, index out
// of range, malformed template, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A file could not be read, decoded, or written. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// A supervision branch was requested for an episode that lacks the
// corresponding condition (instruction or trajectory).
class MissingCondition : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite intermediate.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace robogrid

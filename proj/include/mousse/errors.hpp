#pragma once

#include <stdexcept>
#include <string>

namespace mousse {

// Error taxonomy shared by every module. Callers that only care about
// "something failed" can catch `Error`.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes do not agree with the operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf input or a numerical breakdown during an iteration.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A hyperparameter or argument is outside its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An object was used before it reached the required state.
class StateError : public Error {
 public:
  using Error::Error;
};

// Index or step outside the valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A record or input violates an operation's contract (e.g. the excessive
// loss of a run without a decay phase).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mousse

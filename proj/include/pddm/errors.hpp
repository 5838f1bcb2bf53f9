#pragma once

#include <stdexcept>
#include <string>

namespace pddm {

// Base class for every error thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not chain (message names the operands).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input, e.g. normalizing a (near-)zero vector.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values outside the callee's contract.
class InputError : public Error {
 public:
  using Error::Error;
};

// Bad configuration (unknown key, invalid value, impossible batch spec).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset loading/validation failure (message names the offending row).
class DataError : public Error {
 public:
  using Error::Error;
};

// Batch composition makes hard-quadruplet mining impossible.
class MiningError : public Error {
 public:
  using Error::Error;
};

// Checkpoint version/corruption/shape problems.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pddm

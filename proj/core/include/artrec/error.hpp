#pragma once

#include <stdexcept>
#include <string>

namespace artrec {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

// Car-following state that admits no acceleration (e.g. non-positive gap).
class InfeasibleStateError : public Error {
 public:
  using Error::Error;
};

// A leader trajectory ended before the simulation horizon needed it.
class InsufficientHorizonError : public Error {
 public:
  using Error::Error;
};

// Detector-event matching could not assign every vehicle.
class DeductionFailureError : public Error {
 public:
  using Error::Error;
};

// A lane-change splice point is unreachable on the target hypothetical.
class SpliceInfeasibleError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class TrainingDivergenceError : public Error {
 public:
  using Error::Error;
};

// Synthetic scenario generation could not satisfy the configuration.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Observation degradation found no eligible probe vehicle for a lane-cycle.
class DegradationError : public Error {
 public:
  using Error::Error;
};

// A scenario violates the per-lane probe-vehicle assumption.
class UnsupportedScenarioError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace artrec

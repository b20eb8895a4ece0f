#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a documented invariant (SPD grams, form constants, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A time argument falls outside the interval a family is defined on.
class RangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, long step = -1)
      : Error(what), step_(step) {}

  // Time-step index at which the failure happened, -1 if not step related.
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// Explicit reference integrator could not make progress.
class StiffnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mreg

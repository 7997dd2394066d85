#pragma once

#include <stdexcept>
#include <string>

namespace qreg {

/// Bad arguments or malformed inputs (CLI exit code 1).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure of an otherwise valid computation (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConditioningError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SamplingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Chunk / manifest / CSV problems. Treated as input errors by the CLI.
class DataError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace qreg

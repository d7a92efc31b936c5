#pragma once

#include <stdexcept>
#include <string>

namespace gflowlab {

// Root of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (masked action, wrong dimension, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Invalid layer sizes, hyperparameters, or experiment config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or incomplete input data, e.g. a reward table missing a sequence.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

// The exhaustive oracles refuse state or trajectory spaces beyond their cap.
class OracleScaleError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVariant : public Error {
 public:
  using Error::Error;
};

}  // namespace gflowlab

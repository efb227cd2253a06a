#pragma once

#include <stdexcept>
#include <string>

namespace kcgn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyper-parameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range input data.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, divergence, or other numerical failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Degenerate evaluation input (e.g. no test users, empty rank list).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcgn

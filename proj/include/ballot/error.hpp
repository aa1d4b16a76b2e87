#pragma once

#include <stdexcept>
#include <string>

namespace ballot {

// Every error raised by the library derives from Error. The CLI maps the
// concrete type onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid shapes, layer specs, hyperparameters or config fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (labels, CSV cells, empty classes).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity appeared in a forward/backward pass or an update.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// API called out of order, e.g. backward on a node that is not a scalar loss.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/report I/O or format failure.
class PersistenceError : public Error {
 public:
  using Error::Error;
};

// Target sparsity cannot be met without emptying a hidden layer.
class InfeasibleError : public ConfigError {
 public:
  InfeasibleError(const std::string& what, double min_retention)
      : ConfigError(what), min_retention_(min_retention) {}

  double min_retention() const noexcept { return min_retention_; }

 private:
  double min_retention_;
};

}  // namespace ballot

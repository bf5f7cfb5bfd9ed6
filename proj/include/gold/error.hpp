#pragma once

#include <stdexcept>
#include <string>

namespace gold {

/// Malformed or inconsistent input data (bad files, missing keys, infeasible requests).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during model evaluation or optimization.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or command-line usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gold

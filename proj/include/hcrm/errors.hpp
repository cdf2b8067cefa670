#pragma once

#include <stdexcept>

namespace hcrm {

// Invalid model configuration or command-line settings.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge or left its valid range.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hcrm

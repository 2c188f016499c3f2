#pragma once

#include <stdexcept>
#include <string>

namespace slmc {

// Raised when an optimizer or training loop hits non-finite numbers.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a checkpoint file is malformed or truncated.
struct CorruptFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on invalid run configuration; message carries the JSON path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slmc

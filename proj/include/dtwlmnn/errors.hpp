#pragma once

#include <stdexcept>
#include <string>

namespace dtwlmnn {

/// Malformed input: corpus files, configs, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer failure (non-finite objective, bad scaling).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures: missing files, unwritable paths, corrupt caches.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtwlmnn

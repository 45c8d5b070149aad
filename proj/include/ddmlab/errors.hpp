#pragma once

#include <stdexcept>
#include <string>

namespace ddmlab {

/// Invalid or inconsistent configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data with the wrong shape or an out-of-range label.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed files or non-image inputs.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes a warning line to stderr. Callers that need to inspect warnings
/// also keep them in their result structs.
void log_warning(const std::string& message);

}  // namespace ddmlab

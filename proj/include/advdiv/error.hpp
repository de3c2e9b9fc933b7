#pragma once

#include <stdexcept>
#include <string>

namespace advdiv {

// Invalid or inconsistent configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerically degenerate quantity (zero pilot energy, singular training, ...).
// CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index or time outside the data a trace or frame covers.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace advdiv

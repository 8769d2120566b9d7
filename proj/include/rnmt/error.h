#pragma once

#include <stdexcept>
#include <string>

namespace rnmt {

// Malformed or inconsistent input data (corpus, alignment, checkpoint files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration rejected before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rnmt

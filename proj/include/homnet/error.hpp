#pragma once

#include <stdexcept>
#include <string>

namespace homnet {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid configuration, mismatched shapes.
/// The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical or runtime failure (divergence, non-PD matrix, cap exceeded).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace homnet

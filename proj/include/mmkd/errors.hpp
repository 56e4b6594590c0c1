#pragma once

#include <stdexcept>
#include <string>

namespace mmkd {

/// Invalid configuration or argument combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data (corpora, checkpoints, vocabularies).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or numerically undefined operations.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmkd

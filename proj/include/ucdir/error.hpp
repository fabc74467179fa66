#pragma once

#include <stdexcept>
#include <string>

namespace ucdir {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Graph construction problems: shape mismatches, dangling node ids.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. calling backward() on a non-scalar root.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Pre-normalization feature norm fell below the collapse threshold.
class CollapseError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset, checkpoint or report input.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown config key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during numerical work.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ucdir

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace enlarge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two paths or filtrations do not share a time grid / atom set.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A path is not constant on the blocks of its filtration.
class NotAdapted : public Error {
 public:
  using Error::Error;
};

/// A path fails the exact martingale check.
class NotMartingale : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical integration failed; carries the best estimate it reached.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double estimate, double error_bound)
      : Error(what), estimate_(estimate), error_bound_(error_bound) {}
  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

/// Configuration could not be parsed or contains unknown keys.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {}, long line = 0)
      : Error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  long line() const noexcept { return line_; }

 private:
  std::string key_;
  long line_;
};

}  // namespace enlarge

#pragma once

#include <stdexcept>
#include <string>

namespace rcmcl {

// Base for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate batches, failed gradient oracles.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcmcl

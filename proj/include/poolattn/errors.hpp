#pragma once

#include <stdexcept>
#include <string>

namespace poolattn {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Pool output size larger than the input it pools.
class PoolSizeError : public Error {
 public:
  using Error::Error;
};

// Invalid module or run configuration (even kernel, mismatched anchors, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// A library operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Finite-difference oracle could not evaluate its function.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Malformed tensor file or fixture.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace poolattn

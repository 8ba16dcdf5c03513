#pragma once

#include <stdexcept>
#include <string>

namespace landmark {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (files, subjects, configs built from data).
class DataError : public Error {
  public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Invalid run configuration (flags, parameter ranges).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Numerical failure: non-positive-definite covariance after jitter,
// non-convergence, singular information.
class NumericError : public Error {
  public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace landmark

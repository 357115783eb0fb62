#pragma once

#include <stdexcept>
#include <string>

namespace condcov {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad orders, sizes, levels, unknown names.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Bad data: samples too small, degenerate columns, unparsable input.
class DataError : public Error {
public:
  using Error::Error;
};

// Numeric failure: non-finite values, violated numeric invariants.
class NumericError : public Error {
public:
  using Error::Error;
};

// Evaluation outside the working cube.
class DomainError : public Error {
public:
  using Error::Error;
};

}  // namespace condcov

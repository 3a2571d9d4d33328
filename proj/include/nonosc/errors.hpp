#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nonosc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: bad expressions, constant functions, invalid
/// options. The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Syntax error in an expression, located by byte offset.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : ConfigError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A precondition on the numeric inputs does not hold (range, equilibrium,
/// sample count, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The metric fails to be positive definite at a point.
class DegenerateMetricError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A denominator vanishes at the evaluation point.
class PoleError : public Error {
 public:
  PoleError(const std::string& what, std::vector<double> point)
      : Error(what), point_(std::move(point)) {}

  const std::vector<double>& point() const { return point_; }

 private:
  std::vector<double> point_;
};

/// Numerical failure (step size underflow, non-convergence). Carries the
/// last state reached when meaningful.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::vector<double> last_state = {})
      : Error(what), last_state_(std::move(last_state)) {}

  const std::vector<double>& last_state() const { return last_state_; }

 private:
  std::vector<double> last_state_;
};

}  // namespace nonosc

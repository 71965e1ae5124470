#pragma once

#include <stdexcept>
#include <string>

namespace lmt {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A physical quantity outside the domain where a formula is defined
// (non-positive acceleration, arcsin argument > 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, long minimal_count)
      : Error(what), minimal_count_(minimal_count) {}
  long minimal_count() const noexcept { return minimal_count_; }

 private:
  long minimal_count_;
};

// A Floquet eigenvalue outside the unit disk: the truncated operator is
// no longer a contraction, which only happens when the matrix is wrong.
class ContractionError : public Error {
 public:
  using Error::Error;
};

class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, double first, double second)
      : Error(what), first_(first), second_(second) {}
  double first() const noexcept { return first_; }
  double second() const noexcept { return second_; }

 private:
  double first_;
  double second_;
};

class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmt

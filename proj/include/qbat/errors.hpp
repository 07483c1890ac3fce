#pragma once

#include <stdexcept>
#include <string>

namespace qbat {

// Precondition or type-invariant violation (bad dims, non-Hermitian input, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// log of an operator with an eigenvalue at or below the support cutoff
// under the "reject" policy.
class SingularLogarithm : public std::domain_error {
 public:
  SingularLogarithm(const std::string& what, double eigenvalue)
      : std::domain_error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class IntegratorFailure : public std::runtime_error {
 public:
  IntegratorFailure(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// Two independent evaluations of the same quantity disagreed.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qbat

#pragma once

#include <stdexcept>
#include <string>

namespace splitplot {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The treatment effect is not estimable under the given design.
class DegenerateDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The GLS information matrix is singular; `direction` names the
/// null-space combination of fixed effects.
class InestimableEffectError : public DegenerateDesignError {
 public:
  InestimableEffectError(const std::string& what, std::string direction)
      : DegenerateDesignError(what), direction_(std::move(direction)) {}
  const std::string& direction() const noexcept { return direction_; }

 private:
  std::string direction_;
};

/// No sample size within the search bound reaches the target power.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double variance_floor)
      : std::runtime_error(what), variance_floor_(variance_floor) {}
  double variance_floor() const noexcept { return variance_floor_; }

 private:
  double variance_floor_;
};

}  // namespace splitplot

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dude {

/// Shape disagreement between operands. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value outside its documented range (rank, dims, tolerance, ...).
class RangeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative method did not converge, or a computation produced NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, double residual = 0.0,
                        long step = -1)
      : std::runtime_error(what), residual_(residual), step_(step) {}

  double residual() const noexcept { return residual_; }
  // Training step at which the failure happened, -1 when not applicable.
  long step() const noexcept { return step_; }

 private:
  double residual_;
  long step_;
};

}  // namespace dude

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dude/adapters.hpp"

namespace dude {

/// Gradients of one AdapterState. Fields the method does not train are absent.
struct GradientSet {
  std::optional<Matrix> dB;     // d x r
  std::optional<Matrix> dA;     // r x k
  std::optional<Vector> dm;     // k
  std::optional<Matrix> dBase;  // d x k, full only
  Vector dx;                    // k; empty for batch gradients
};

/// Sum of squares over every trainable gradient entry (dx excluded).
double squared_norm(const GradientSet& g);

/// Parameter gradients from G = ∂L/∂W′, the gradient w.r.t. the effective
/// weight. Normalized methods back-propagate through the column norm
/// exactly; dx is left empty.
GradientSet backward_from_weight_grad(const AdapterState& state, const Matrix& G);

/// Single-sample backward pass for y = W′x given gy = ∂L/∂y.
GradientSet backward(const AdapterState& state, std::span<const double> x,
                     std::span<const double> gy);

/// Direction-space gradient H = ∂L/∂V for a normalized method, with
/// V = base + scaling·BA. Every column H_j is orthogonal to v_j up to
/// O(ε/‖v_j‖).
Matrix direction_gradient(const AdapterState& state, const Matrix& G);

struct FdStepRule {
  // h = relative·(1 + |θ|)
  double relative = 1e-5;
  double step(double theta) const;
};

/// Central-difference gradients of L = ⟨gy, forward(state, x)⟩ over every
/// trainable scalar and every input entry.
GradientSet finite_diff_grads(const AdapterState& state, std::span<const double> x,
                              std::span<const double> gy, const FdStepRule& rule = {});

struct ParamError {
  std::string name;  // "B", "A", "m", "base", "x"
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamError> errors;
  bool pass = false;
  double epsilon = 0.0;    // FdStepRule::relative used
  double tolerance = 0.0;

  double worst() const;
};

/// Per-entry error |a − f| / max(1, |a|, |f|), maximized per parameter.
/// Fields present in one set but not the other count as a failure.
GradCheckReport compare_gradients(const GradientSet& analytic,
                                  const GradientSet& numeric, double tolerance,
                                  double epsilon = FdStepRule{}.relative);

/// backward vs finite_diff_grads on a random (x, gy) drawn from `seed`.
/// Throws NumericError only if the forward pass is non-finite.
GradCheckReport grad_check(const AdapterState& state, std::uint64_t seed,
                           double tolerance = 1e-5);

}  // namespace dude

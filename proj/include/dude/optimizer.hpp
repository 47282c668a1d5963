#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dude/matrix.hpp"

namespace dude {

enum class OptimizerKind { sgd, adam };
enum class SchedulerKind { cosine, constant };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(SchedulerKind kind);
SchedulerKind parse_scheduler(std::string_view name);

struct OptState {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  // Adam moments, one buffer per parameter tensor, allocated on first step.
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

//
// In-place update of every tensor in `params` from the matching `grads`.
//   sgd:  θ ← θ − lr·g
//   adam: bias-corrected moments, θ ← θ − lr·m̂/(sqrt(v̂) + eps)
// Throws DimensionError if the tensor list or any tensor size disagrees
// with the gradients or with moment buffers from earlier steps.
//
void optimizer_step(std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads, OptState& opt,
                    double lr);

/// Linear warmup over ceil(warmup_frac·total_steps) steps, then half-cosine
/// decay from base_lr to 0 at total_steps.
double cosine_lr(long step, long total_steps, double warmup_frac, double base_lr);

double scheduled_lr(SchedulerKind kind, long step, long total_steps,
                    double warmup_frac, double base_lr);

}  // namespace dude

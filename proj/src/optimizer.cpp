#include "dude/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dude/errors.hpp"

namespace dude {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw RangeError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(SchedulerKind kind) {
  return kind == SchedulerKind::cosine ? "cosine" : "constant";
}

SchedulerKind parse_scheduler(std::string_view name) {
  if (name == "cosine") return SchedulerKind::cosine;
  if (name == "constant") return SchedulerKind::constant;
  throw RangeError("unknown scheduler '" + std::string(name) + "'");
}

void optimizer_step(std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads, OptState& opt,
                    double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer_step: " + std::to_string(params.size()) +
                         " parameter tensors vs " + std::to_string(grads.size()) +
                         " gradient tensors");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size()) {
      throw DimensionError("optimizer_step: tensor " + std::to_string(t) + " has " +
                           std::to_string(params[t].size()) + " entries, gradient has " +
                           std::to_string(grads[t].size()));
    }
  }

  if (opt.kind == OptimizerKind::sgd) {
    for (std::size_t t = 0; t < params.size(); ++t)
      for (std::size_t i = 0; i < params[t].size(); ++i) params[t][i] -= lr * grads[t][i];
    ++opt.step;
    return;
  }

  if (opt.first_moment.empty()) {
    for (const auto& p : params) {
      opt.first_moment.emplace_back(p.size(), 0.0);
      opt.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (opt.first_moment.size() != params.size()) {
    throw DimensionError("optimizer_step: adam state tracks " +
                         std::to_string(opt.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (opt.first_moment[t].size() != params[t].size()) {
      throw DimensionError("optimizer_step: adam buffer " + std::to_string(t) +
                           " shape changed");
    }
  }

  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    Vector& m = opt.first_moment[t];
    Vector& v = opt.second_moment[t];
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double g = grads[t][i];
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      params[t][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
    }
  }
}

double cosine_lr(long step, long total_steps, double warmup_frac, double base_lr) {
  if (total_steps <= 0) return 0.0;
  // Guard against 0.03·100 = 3.0000000000000004 rounding up to 4.
  const long warmup = static_cast<long>(
      std::ceil(warmup_frac * static_cast<double>(total_steps) - 1e-9));
  if (step < warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const long span = total_steps - warmup;
  if (span <= 0) return 0.0;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double scheduled_lr(SchedulerKind kind, long step, long total_steps,
                    double warmup_frac, double base_lr) {
  if (kind == SchedulerKind::constant) return base_lr;
  return cosine_lr(step, total_steps, warmup_frac, base_lr);
}

}  // namespace dude

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dude/model.hpp"
#include "dude/optimizer.hpp"
#include "dude/task.hpp"

namespace dude {

struct TrainConfig {
  long steps = 500;
  std::size_t batch = 32;
  double lr = 1e-3;
  double warmup_frac = 0.03;
  SchedulerKind scheduler = SchedulerKind::cosine;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 42;  // training sample stream
  long eval_every = 50;
  std::size_t eval_size = 512;
};

struct MetricsRecord {
  long step = 0;
  double loss = 0.0;       // batch loss before the update
  double grad_norm = 0.0;  // global L2 over all trainable gradients
  double lr = 0.0;         // learning rate applied at this step
  std::optional<double> eval;
};

/// Held-out mean squared error (teacher_student) or accuracy (cluster_classify).
double evaluate(const Model& model, const Task& task, std::span<const Sample> eval_set);

//
// Deterministic training loop: draw a batch, loss_and_grads, schedule the
// learning rate, optimizer_step. Step s uses scheduled_lr(s); eval runs after
// the update whenever (s + 1) % eval_every == 0. Adapter base matrices are
// never written. Throws NumericError carrying the failing step index.
//
std::vector<MetricsRecord> train(Model& model, const Task& task, const TrainConfig& config);

struct Summary {
  double final_loss = 0.0;
  std::optional<double> best_eval;
  long steps = 0;
  double tail_mean_loss = 0.0;  // mean loss over the last 10% of records
};

/// best_eval is the minimum eval for mse tasks and the maximum for accuracy.
/// Throws RangeError on empty input.
Summary summarize(std::span<const MetricsRecord> records, bool eval_higher_is_better);

}  // namespace dude

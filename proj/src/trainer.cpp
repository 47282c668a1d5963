#include "dude/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dude/errors.hpp"

namespace dude {

double evaluate(const Model& model, const Task& task, std::span<const Sample> eval_set) {
  if (eval_set.empty()) return 0.0;
  double acc = 0.0;
  for (const Sample& s : eval_set) {
    const Vector out = predict(model, s.x);
    if (task.kind == TaskKind::teacher_student) {
      acc += sample_loss(LossKind::mse, out, s);
    } else {
      const auto best = std::max_element(out.begin(), out.end()) - out.begin();
      acc += static_cast<std::size_t>(best) == s.label ? 1.0 : 0.0;
    }
  }
  return acc / static_cast<double>(eval_set.size());
}

std::vector<MetricsRecord> train(Model& model, const Task& task, const TrainConfig& config) {
  if (config.steps < 1) throw RangeError("train: steps must be >= 1");
  if (config.batch < 1) throw RangeError("train: batch must be >= 1");
  if (config.eval_every < 1) throw RangeError("train: eval_every must be >= 1");
  validate(model);

  const std::vector<Sample> eval_set = task.eval_set(config.eval_size);
  std::mt19937_64 rng = task.train_stream(config.seed);
  OptState opt;
  opt.kind = config.optimizer;

  std::vector<MetricsRecord> records;
  records.reserve(static_cast<std::size_t>(config.steps));
  std::vector<Sample> batch(config.batch);
  for (long step = 0; step < config.steps; ++step) {
    for (Sample& s : batch) s = task.draw(rng);

    LossAndGrads lg;
    try {
      lg = loss_and_grads(model, batch);
    } catch (const NumericError& e) {
      throw NumericError("numeric failure at step " + std::to_string(step) + ": " +
                             e.what(),
                         0.0, step);
    }
    MetricsRecord rec;
    rec.step = step;
    rec.loss = lg.loss;
    rec.grad_norm = global_grad_norm(lg.grads);
    rec.lr = scheduled_lr(config.scheduler, step, config.steps, config.warmup_frac,
                          config.lr);
    if (!std::isfinite(rec.grad_norm)) {
      throw NumericError("numeric failure at step " + std::to_string(step) +
                             ": gradient norm is not finite",
                         0.0, step);
    }

    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> grads;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      auto p = trainable_views(model.layers[l].state);
      auto g = gradient_views(lg.grads[l]);
      params.insert(params.end(), p.begin(), p.end());
      grads.insert(grads.end(), g.begin(), g.end());
    }
    optimizer_step(params, grads, opt, rec.lr);

    if ((step + 1) % config.eval_every == 0) {
      rec.eval = evaluate(model, task, eval_set);
      if (!std::isfinite(*rec.eval)) {
        throw NumericError("numeric failure at step " + std::to_string(step) +
                               ": eval is not finite",
                           0.0, step);
      }
    }
    records.push_back(rec);
  }
  return records;
}

Summary summarize(std::span<const MetricsRecord> records, bool eval_higher_is_better) {
  if (records.empty()) throw RangeError("summarize: no records");
  Summary s;
  s.final_loss = records.back().loss;
  s.steps = static_cast<long>(records.size());
  for (const MetricsRecord& r : records) {
    if (!r.eval) continue;
    if (!s.best_eval || (eval_higher_is_better ? *r.eval > *s.best_eval
                                               : *r.eval < *s.best_eval)) {
      s.best_eval = r.eval;
    }
  }
  const std::size_t tail = std::max<std::size_t>(1, records.size() / 10);
  double acc = 0.0;
  for (std::size_t i = records.size() - tail; i < records.size(); ++i)
    acc += records[i].loss;
  s.tail_mean_loss = acc / static_cast<double>(tail);
  return s;
}

}  // namespace dude

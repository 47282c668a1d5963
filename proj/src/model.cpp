#include "dude/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dude/errors.hpp"

namespace dude {

void validate(const Model& model) {
  if (model.layers.empty()) throw RangeError("model has no layers");
  const Method method = model.layers.front().state.method;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const AdapterState& s = model.layers[i].state;
    if (s.method != method) {
      throw RangeError("layer " + std::to_string(i) + " uses method '" +
                       std::string(to_string(s.method)) + "', expected '" +
                       std::string(to_string(method)) + "'");
    }
    if (i > 0 && model.layers[i - 1].state.out_dim() != s.in_dim()) {
      throw DimensionError("layer " + std::to_string(i - 1) + " " +
                           model.layers[i - 1].state.base.shape() +
                           " cannot feed layer " + std::to_string(i) + " " +
                           s.base.shape());
    }
  }
}

Model make_model(const Task& task, const AdapterConfig& cfg) {
  Model model;
  model.loss = task.kind == TaskKind::teacher_student ? LossKind::mse
                                                      : LossKind::cross_entropy;
  model.layers.push_back({initialize(task.base_weight, cfg), false});
  return model;
}

Vector predict(const Model& model, std::span<const double> x) {
  Vector h(x.begin(), x.end());
  for (const Layer& layer : model.layers) {
    h = forward(layer.state, h);
    if (layer.relu)
      for (double& v : h) v = std::max(v, 0.0);
  }
  return h;
}

namespace {

// Returns the loss and writes ∂loss/∂output into `grad`.
double loss_with_grad(LossKind kind, std::span<const double> out,
                      const Sample& sample, Vector& grad) {
  grad.assign(out.size(), 0.0);
  if (kind == LossKind::mse) {
    if (sample.target.size() != out.size()) {
      throw DimensionError("mse: target length " + std::to_string(sample.target.size()) +
                           " vs output length " + std::to_string(out.size()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = out[i] - sample.target[i];
      loss += r * r;
      grad[i] = 2.0 * r;
    }
    return loss;
  }
  if (sample.label >= out.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(sample.label) +
                         " out of range for " + std::to_string(out.size()) + " classes");
  }
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    grad[i] = std::exp(out[i] - top);
    total += grad[i];
  }
  for (double& g : grad) g /= total;
  grad[sample.label] -= 1.0;
  return std::log(total) + top - out[sample.label];
}

}  // namespace

double sample_loss(LossKind kind, std::span<const double> output, const Sample& sample) {
  Vector unused;
  return loss_with_grad(kind, output, sample, unused);
}

LossAndGrads loss_and_grads(const Model& model, std::span<const Sample> batch) {
  if (batch.empty()) throw RangeError("loss_and_grads: empty batch");
  validate(model);

  const std::size_t depth = model.layers.size();
  std::vector<Matrix> weights;
  weights.reserve(depth);
  std::vector<Matrix> weight_grads;
  for (const Layer& layer : model.layers) {
    weights.push_back(effective_weight(layer.state));
    weight_grads.emplace_back(layer.state.out_dim(), layer.state.in_dim());
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<Vector> inputs(depth);
  std::vector<Vector> pre(depth);
  Vector gy;
  for (const Sample& sample : batch) {
    Vector h = sample.x;
    for (std::size_t l = 0; l < depth; ++l) {
      inputs[l] = h;
      pre[l] = matvec(weights[l], h);
      h = pre[l];
      if (model.layers[l].relu)
        for (double& v : h) v = std::max(v, 0.0);
    }
    total += loss_with_grad(model.loss, h, sample, gy);

    for (std::size_t l = depth; l-- > 0;) {
      if (model.layers[l].relu) {
        for (std::size_t i = 0; i < gy.size(); ++i)
          if (!(pre[l][i] > 0.0)) gy[i] = 0.0;
      }
      Matrix& G = weight_grads[l];
      const Vector& x = inputs[l];
      for (std::size_t i = 0; i < G.rows(); ++i) {
        const double gi = gy[i] * inv_batch;
        if (gi == 0.0) continue;
        for (std::size_t j = 0; j < G.cols(); ++j) G(i, j) += gi * x[j];
      }
      if (l > 0) gy = matvec_transposed(weights[l], gy);
    }
  }

  LossAndGrads out;
  out.loss = total * inv_batch;
  if (!std::isfinite(out.loss)) throw NumericError("loss is not finite");
  out.grads.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    out.grads.push_back(backward_from_weight_grad(model.layers[l].state, weight_grads[l]));
  }
  return out;
}

std::vector<std::span<double>> trainable_views(AdapterState& state) {
  if (state.method == Method::full) return {state.base.data()};
  std::vector<std::span<double>> views{state.B.data(), state.A.data()};
  if (state.m) views.emplace_back(*state.m);
  return views;
}

std::vector<std::span<const double>> gradient_views(const GradientSet& grads) {
  std::vector<std::span<const double>> views;
  if (grads.dBase) views.push_back(grads.dBase->data());
  if (grads.dB) views.push_back(grads.dB->data());
  if (grads.dA) views.push_back(grads.dA->data());
  if (grads.dm) views.emplace_back(*grads.dm);
  return views;
}

double global_grad_norm(std::span<const GradientSet> grads) {
  double acc = 0.0;
  for (const GradientSet& g : grads) acc += squared_norm(g);
  return std::sqrt(acc);
}

}  // namespace dude

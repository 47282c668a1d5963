#pragma once

#include <span>
#include <vector>

#include "dude/adapters.hpp"
#include "dude/grad.hpp"
#include "dude/task.hpp"

namespace dude {

enum class LossKind { mse, cross_entropy };

struct Layer {
  AdapterState state;
  bool relu = false;  // applied to this layer's output
};

// Stack of adapted layers sharing one Method. Layer i maps in_dim -> out_dim
// and feeds layer i+1.
struct Model {
  std::vector<Layer> layers;
  LossKind loss = LossKind::mse;
};

/// Throws DimensionError/RangeError if layer shapes or methods disagree.
void validate(const Model& model);

/// One adapted layer over the task's W₀; mse for teacher_student,
/// cross_entropy for cluster_classify.
Model make_model(const Task& task, const AdapterConfig& cfg);

Vector predict(const Model& model, std::span<const double> x);

/// Sum of squared errors over outputs (mse) or -log softmax(label) (cross_entropy).
double sample_loss(LossKind kind, std::span<const double> output, const Sample& sample);

struct LossAndGrads {
  double loss = 0.0;                // mean over the batch
  std::vector<GradientSet> grads;  // one per layer, dx empty
};

//
// Mean loss over `batch` and its gradient for every layer's trainables.
// ReLU passes gradient only where the pre-activation is strictly positive.
// Throws NumericError if the loss is not finite.
//
LossAndGrads loss_and_grads(const Model& model, std::span<const Sample> batch);

/// Trainable buffers of one layer in a fixed order (base | B, A, m).
std::vector<std::span<double>> trainable_views(AdapterState& state);
/// Gradient buffers in the same order as trainable_views.
std::vector<std::span<const double>> gradient_views(const GradientSet& grads);

/// sqrt of the summed squares over every layer's trainable gradients.
double global_grad_norm(std::span<const GradientSet> grads);

}  // namespace dude

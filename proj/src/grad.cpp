#include "dude/grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dude/errors.hpp"

namespace dude {
namespace {

Matrix times_transposed(const Matrix& a, const Matrix& b) {  // a·bᵀ
  return matmul(a, b.transposed());
}

Matrix transposed_times(const Matrix& a, const Matrix& b) {  // aᵀ·b
  return matmul(a.transposed(), b);
}

double accumulate_squares(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return acc;
}

}  // namespace

double squared_norm(const GradientSet& g) {
  double acc = 0.0;
  if (g.dB) acc += accumulate_squares(g.dB->data());
  if (g.dA) acc += accumulate_squares(g.dA->data());
  if (g.dm) acc += accumulate_squares(*g.dm);
  if (g.dBase) acc += accumulate_squares(g.dBase->data());
  return acc;
}

Matrix direction_gradient(const AdapterState& state, const Matrix& G) {
  const Matrix v = direction_matrix(state);
  const Vector norms = column_norms(v);
  const Vector& m = *state.m;
  const double eps = state.config.norm_epsilon;

  // d/dv [m·v/(‖v‖+ε)] = (m/n)·(I − v·vᵀ/(‖v‖·n)),  n = ‖v‖ + ε
  Matrix h(v.rows(), v.cols());
  for (std::size_t j = 0; j < v.cols(); ++j) {
    const double n = norms[j] + eps;
    double along = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) along += v(i, j) * G(i, j);
    const double proj = norms[j] > 0.0 ? along / (norms[j] * n) : 0.0;
    const double gain = m[j] / n;
    for (std::size_t i = 0; i < v.rows(); ++i)
      h(i, j) = gain * (G(i, j) - proj * v(i, j));
  }
  return h;
}

GradientSet backward_from_weight_grad(const AdapterState& state, const Matrix& G) {
  if (G.rows() != state.out_dim() || G.cols() != state.in_dim()) {
    throw DimensionError("backward: weight gradient " + G.shape() +
                         " does not match layer " + state.base.shape());
  }
  GradientSet out;
  const double s = state.config.scaling;
  switch (state.method) {
    case Method::full:
      out.dBase = G;
      break;
    case Method::lora:
    case Method::pissa:
      out.dB = scaled(times_transposed(G, state.A), s);
      out.dA = scaled(transposed_times(state.B, G), s);
      break;
    case Method::dora:
    case Method::dude:
    case Method::dude_a:
    case Method::dude_b: {
      const Matrix v = direction_matrix(state);
      const Vector norms = column_norms(v);
      Vector dm(v.cols(), 0.0);
      for (std::size_t j = 0; j < v.cols(); ++j) {
        double along = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) along += v(i, j) * G(i, j);
        dm[j] = along / (norms[j] + state.config.norm_epsilon);
      }
      const Matrix h = direction_gradient(state, G);
      out.dm = std::move(dm);
      out.dB = scaled(times_transposed(h, state.A), s);
      out.dA = scaled(transposed_times(state.B, h), s);
      break;
    }
  }
  return out;
}

GradientSet backward(const AdapterState& state, std::span<const double> x,
                     std::span<const double> gy) {
  if (x.size() != state.in_dim() || gy.size() != state.out_dim()) {
    throw DimensionError("backward: x length " + std::to_string(x.size()) +
                         ", gy length " + std::to_string(gy.size()) +
                         " vs layer " + state.base.shape());
  }
  GradientSet out = backward_from_weight_grad(state, outer(gy, x));
  out.dx = matvec_transposed(effective_weight(state), gy);
  return out;
}

double FdStepRule::step(double theta) const {
  return relative * (1.0 + std::abs(theta));
}

GradientSet finite_diff_grads(const AdapterState& state, std::span<const double> x,
                              std::span<const double> gy, const FdStepRule& rule) {
  AdapterState probe = state;
  Vector input(x.begin(), x.end());
  auto loss = [&]() { return dot(gy, forward(probe, input)); };

  auto differentiate = [&](std::span<double> params) {
    Vector grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      const double h = rule.step(saved);
      params[i] = saved + h;
      const double up = loss();
      params[i] = saved - h;
      const double down = loss();
      params[i] = saved;
      grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
  };
  auto as_matrix = [](const Matrix& shape, Vector values) {
    return Matrix(shape.rows(), shape.cols(), std::move(values));
  };

  GradientSet out;
  if (probe.method == Method::full) {
    out.dBase = as_matrix(probe.base, differentiate(probe.base.data()));
  } else {
    out.dB = as_matrix(probe.B, differentiate(probe.B.data()));
    out.dA = as_matrix(probe.A, differentiate(probe.A.data()));
    if (probe.m) out.dm = differentiate(*probe.m);
  }
  out.dx = differentiate(input);
  return out;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : errors) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport compare_gradients(const GradientSet& analytic,
                                  const GradientSet& numeric, double tolerance,
                                  double epsilon) {
  if (!(tolerance > 0.0)) throw RangeError("grad_check: tolerance must be > 0");

  GradCheckReport report;
  report.tolerance = tolerance;
  report.epsilon = epsilon;
  report.pass = true;

  auto compare = [&](const std::string& name, std::span<const double> a,
                     std::span<const double> f) {
    double worst = 0.0;
    if (a.size() != f.size()) {
      worst = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::abs(a[i]), std::abs(f[i])});
        const double err = std::abs(a[i] - f[i]) / scale;
        // NaN compares false, so route it to +inf explicitly.
        worst = std::isnan(err) ? std::numeric_limits<double>::infinity()
                                : std::max(worst, err);
      }
    }
    report.errors.push_back({name, worst});
    if (!(worst <= tolerance)) report.pass = false;
  };
  auto compare_optional = [&](const std::string& name, const auto& a, const auto& f) {
    if (a.has_value() != f.has_value()) {
      report.errors.push_back({name, std::numeric_limits<double>::infinity()});
      report.pass = false;
      return;
    }
    if (!a) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*a)>, Matrix>) {
      compare(name, a->data(), f->data());
    } else {
      compare(name, *a, *f);
    }
  };

  compare_optional("B", analytic.dB, numeric.dB);
  compare_optional("A", analytic.dA, numeric.dA);
  compare_optional("m", analytic.dm, numeric.dm);
  compare_optional("base", analytic.dBase, numeric.dBase);
  compare("x", analytic.dx, numeric.dx);
  return report;
}

GradCheckReport grad_check(const AdapterState& state, std::uint64_t seed,
                           double tolerance) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(state.in_dim());
  Vector gy(state.out_dim());
  for (double& v : x) v = normal(rng);
  for (double& v : gy) v = normal(rng);

  for (double y : forward(state, x)) {
    if (!std::isfinite(y)) throw NumericError("grad_check: forward pass is not finite");
  }
  const FdStepRule rule;
  return compare_gradients(backward(state, x, gy), finite_diff_grads(state, x, gy, rule),
                           tolerance, rule.relative);
}

}  // namespace dude

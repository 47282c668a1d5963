#include "dude/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dude/errors.hpp"
#include "dude/svd.hpp"

namespace dude {
namespace {

constexpr std::array<std::string_view, 7> kMethodNames = {
    "full", "lora", "dora", "pissa", "dude", "dude_a", "dude_b"};

void require_method(const AdapterConfig& cfg, std::initializer_list<Method> allowed,
                    const char* fn) {
  if (std::find(allowed.begin(), allowed.end(), cfg.method) == allowed.end()) {
    throw RangeError(std::string(fn) + ": unsupported method '" +
                     std::string(to_string(cfg.method)) + "'");
  }
}

void require_rank(const Matrix& w0, const AdapterConfig& cfg) {
  if (w0.empty()) throw DimensionError("adapter: empty base weight");
  const std::size_t p = std::min(w0.rows(), w0.cols());
  if (cfg.rank < 1 || cfg.rank > p) {
    throw RangeError("rank r=" + std::to_string(cfg.rank) + " outside [1, " +
                     std::to_string(p) + "] for a " + w0.shape() + " layer");
  }
  if (!(cfg.scaling > 0.0) || !std::isfinite(cfg.scaling)) {
    throw RangeError("scaling must be positive and finite");
  }
  if (!(cfg.norm_epsilon >= 0.0)) {
    throw RangeError("norm_epsilon must be non-negative");
  }
}

Vector guarded_magnitudes(const Matrix& w0, double epsilon) {
  Vector m = column_norms(w0);
  for (double& v : m)
    if (v == 0.0) v = epsilon;
  return m;
}

}  // namespace

std::string_view to_string(Method m) {
  return kMethodNames[static_cast<std::size_t>(m)];
}

Method parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == name) return static_cast<Method>(i);
  }
  throw RangeError("unknown method '" + std::string(name) + "'");
}

Matrix kaiming_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                       std::uint64_t seed) {
  if (fan_in < 1) throw RangeError("kaiming_uniform: fan_in must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix out(rows, cols);
  for (double& v : out.data()) v = dist(rng);
  return out;
}

AdapterState init_full(const Matrix& w0, const AdapterConfig& cfg) {
  require_method(cfg, {Method::full}, "init_full");
  if (w0.empty()) throw DimensionError("adapter: empty base weight");
  return AdapterState{Method::full, w0, {}, {}, std::nullopt, cfg};
}

AdapterState init_lora(const Matrix& w0, const AdapterConfig& cfg) {
  require_method(cfg, {Method::lora}, "init_lora");
  require_rank(w0, cfg);
  return AdapterState{Method::lora, w0, Matrix(w0.rows(), cfg.rank),
                      kaiming_uniform(cfg.rank, w0.cols(), w0.cols(), cfg.seed),
                      std::nullopt, cfg};
}

AdapterState init_dora(const Matrix& w0, const AdapterConfig& cfg) {
  require_method(cfg, {Method::dora}, "init_dora");
  require_rank(w0, cfg);
  return AdapterState{Method::dora, w0, Matrix(w0.rows(), cfg.rank),
                      kaiming_uniform(cfg.rank, w0.cols(), w0.cols(), cfg.seed),
                      guarded_magnitudes(w0, cfg.norm_epsilon), cfg};
}

AdapterState init_pissa(const Matrix& w0, const AdapterConfig& cfg) {
  require_method(cfg, {Method::pissa}, "init_pissa");
  require_rank(w0, cfg);
  const TruncatedSvd top = truncate_svd(svd(w0), cfg.rank);

  Matrix b = top.U;
  Matrix a = top.V.transposed();
  for (std::size_t c = 0; c < cfg.rank; ++c) {
    const double root = std::sqrt(top.sigma[c]);
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, c) *= root;
    for (std::size_t j = 0; j < a.cols(); ++j) a(c, j) *= root;
  }
  Matrix residual = subtract(w0, scaled(matmul(b, a), cfg.scaling));
  return AdapterState{Method::pissa, std::move(residual), std::move(b),
                      std::move(a), std::nullopt, cfg};
}

AdapterState init_dude(const Matrix& w0, const AdapterConfig& cfg) {
  require_method(cfg, {Method::dude, Method::dude_a, Method::dude_b}, "init_dude");
  require_rank(w0, cfg);
  const TruncatedSvd top = truncate_svd(svd(w0), cfg.rank);

  Matrix b = top.U;
  Matrix a = top.V.transposed();
  for (std::size_t c = 0; c < cfg.rank; ++c) {
    // Share of σ_c carried by B; A carries the rest.
    double on_b = 1.0;
    double on_a = 1.0;
    switch (cfg.method) {
      case Method::dude:
        on_b = on_a = std::sqrt(top.sigma[c]);
        break;
      case Method::dude_a:
        on_a = top.sigma[c];
        break;
      case Method::dude_b:
        on_b = top.sigma[c];
        break;
      default:
        break;
    }
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, c) *= on_b;
    for (std::size_t j = 0; j < a.cols(); ++j) a(c, j) *= on_a;
  }
  Matrix residual = subtract(w0, scaled(matmul(b, a), cfg.scaling));
  return AdapterState{cfg.method, std::move(residual), std::move(b), std::move(a),
                      guarded_magnitudes(w0, cfg.norm_epsilon), cfg};
}

AdapterState initialize(const Matrix& w0, const AdapterConfig& cfg) {
  switch (cfg.method) {
    case Method::full:
      return init_full(w0, cfg);
    case Method::lora:
      return init_lora(w0, cfg);
    case Method::dora:
      return init_dora(w0, cfg);
    case Method::pissa:
      return init_pissa(w0, cfg);
    case Method::dude:
    case Method::dude_a:
    case Method::dude_b:
      return init_dude(w0, cfg);
  }
  throw RangeError("initialize: invalid method");
}

Matrix direction_matrix(const AdapterState& state) {
  if (!state.has_factors()) return state.base;
  Matrix v = matmul(state.B, state.A);
  const double s = state.config.scaling;
  auto vd = v.data();
  auto bd = state.base.data();
  for (std::size_t i = 0; i < vd.size(); ++i) vd[i] = bd[i] + s * vd[i];
  return v;
}

Matrix effective_weight(const AdapterState& state) {
  Matrix v = direction_matrix(state);
  if (!is_normalized(state.method)) return v;

  const Vector& m = *state.m;
  const Vector norms = column_norms(v);
  for (std::size_t j = 0; j < v.cols(); ++j) {
    const double factor = m[j] / (norms[j] + state.config.norm_epsilon);
    for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) *= factor;
  }
  return v;
}

Vector forward(const AdapterState& state, std::span<const double> x) {
  if (x.size() != state.in_dim()) {
    throw DimensionError("forward: input length " + std::to_string(x.size()) +
                         " does not match layer " + state.base.shape());
  }
  return matvec(effective_weight(state), x);
}

}  // namespace dude

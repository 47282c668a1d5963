#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dude/matrix.hpp"

namespace dude {

enum class Method { full, lora, dora, pissa, dude, dude_a, dude_b };

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::full, Method::lora,   Method::dora,  Method::pissa,
    Method::dude, Method::dude_a, Method::dude_b};

std::string_view to_string(Method m);
// Throws RangeError on an unknown name.
Method parse_method(std::string_view name);

// Methods whose effective weight is m ⊙ V / ‖V‖_c.
constexpr bool is_normalized(Method m) {
  return m == Method::dora || m == Method::dude || m == Method::dude_a ||
         m == Method::dude_b;
}
// Methods that split W₀ into a frozen residual plus an SVD-initialized BA.
constexpr bool is_svd_initialized(Method m) {
  return m == Method::pissa || m == Method::dude || m == Method::dude_a ||
         m == Method::dude_b;
}

struct AdapterConfig {
  Method method = Method::lora;
  std::size_t rank = 1;
  // Multiplies BA. Standard LoRA uses alpha/r; the default leaves BA unscaled.
  double scaling = 1.0;
  // Added to every column-norm denominator so zero columns stay finite.
  double norm_epsilon = 1e-12;
  std::uint64_t seed = 0;
};

//
// One adapted d x k linear layer.
//
// base holds W₀ for lora/dora, the frozen residual W_f = W₀ − BA for
// pissa/dude*, and the trainable weight itself for full. B and A are empty
// (0x0) for full. m is present exactly for the normalized methods.
//
struct AdapterState {
  Method method = Method::lora;
  Matrix base;
  Matrix B;
  Matrix A;
  std::optional<Vector> m;
  AdapterConfig config;

  std::size_t out_dim() const noexcept { return base.rows(); }
  std::size_t in_dim() const noexcept { return base.cols(); }
  bool has_factors() const noexcept { return method != Method::full; }
};

/// Entries i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Matrix kaiming_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                       std::uint64_t seed);

AdapterState init_full(const Matrix& w0, const AdapterConfig& cfg);
AdapterState init_lora(const Matrix& w0, const AdapterConfig& cfg);
AdapterState init_dora(const Matrix& w0, const AdapterConfig& cfg);
AdapterState init_pissa(const Matrix& w0, const AdapterConfig& cfg);
// dude, dude_a and dude_b differ only in how Σ_r is split between B and A.
AdapterState init_dude(const Matrix& w0, const AdapterConfig& cfg);

/// Dispatches on cfg.method.
AdapterState initialize(const Matrix& w0, const AdapterConfig& cfg);

/// base + scaling·B·A, before any column normalization.
Matrix direction_matrix(const AdapterState& state);

/// The weight the layer applies: V for full/lora/pissa, m ⊙ V/(‖V‖_c + ε)
/// for dora/dude*.
Matrix effective_weight(const AdapterState& state);

Vector forward(const AdapterState& state, std::span<const double> x);

/// Collapses the adapter into one dense matrix for inference.
inline Matrix merge(const AdapterState& state) { return effective_weight(state); }

}  // namespace dude

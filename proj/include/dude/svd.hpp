#pragma once

#include <cstddef>

#include "dude/matrix.hpp"

namespace dude {

/// Thin SVD W = U·diag(sigma)·Vᵀ with p = min(d, k) triplets.
///
/// sigma is non-increasing. Each left singular vector has its largest-magnitude
/// entry positive (lowest row index wins ties), which makes the factors
/// reproducible and initializations built on them comparable across runs.
struct SvdFactors {
  Matrix U;      // d x p
  Vector sigma;  // p
  Matrix V;      // k x p
};

/// Leading r triplets of an SvdFactors.
struct TruncatedSvd {
  Matrix U;      // d x r
  Vector sigma;  // r
  Matrix V;      // k x r

  std::size_t rank() const noexcept { return sigma.size(); }
  // U·diag(sigma)·Vᵀ
  Matrix reconstruct() const;
};

struct SvdOptions {
  int max_sweeps = 100;
  // A column pair counts as orthogonal when |g_ij| <= tol·sqrt(g_ii·g_jj).
  double tolerance = 1e-12;
};

//
// One-sided (Hestenes) Jacobi SVD.
//
// Works on the orientation with at least as many rows as columns and
// transposes back when d < k. Throws NumericError carrying the largest
// remaining scaled off-diagonal Gram entry if the sweep cap is reached.
//
SvdFactors svd(const Matrix& w, const SvdOptions& options = {});

/// Throws RangeError unless 1 <= r <= p.
TruncatedSvd truncate_svd(const SvdFactors& factors, std::size_t r);

/// U·diag(sigma)·Vᵀ over all p triplets.
Matrix reconstruct(const SvdFactors& factors);

}  // namespace dude

#include "dude/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dude/errors.hpp"

namespace dude {
namespace {

struct RawSvd {
  Matrix U;
  Vector sigma;
  Matrix V;
};

double column_dot(const Matrix& a, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, i) * a(r, j);
  return acc;
}

// [ci cj] <- [ci cj]·[[cs, sn], [-sn, cs]]
void rotate_columns(Matrix& a, std::size_t i, std::size_t j, double cs, double sn) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double ti = a(r, i);
    const double tj = a(r, j);
    a(r, i) = cs * ti - sn * tj;
    a(r, j) = sn * ti + cs * tj;
  }
}

// Replaces column j of u with a unit vector orthogonal to every column listed
// in `done`. Picks the standard basis vector with the largest residual after
// projection, then projects twice.
void complete_column(Matrix& u, std::size_t j, const std::vector<std::size_t>& done) {
  const std::size_t m = u.rows();
  Vector best;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < m; ++e) {
    Vector cand(m, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t q : done) {
        double proj = 0.0;
        for (std::size_t r = 0; r < m; ++r) proj += u(r, q) * cand[r];
        for (std::size_t r = 0; r < m; ++r) cand[r] -= proj * u(r, q);
      }
    }
    const double n = norm2(cand);
    if (n > best_norm + 1e-3) {
      best_norm = n;
      best = std::move(cand);
    }
  }
  for (std::size_t r = 0; r < m; ++r) u(r, j) = best[r] / best_norm;
}

// Requires a.rows() >= a.cols().
RawSvd jacobi_tall(Matrix a, const SvdOptions& options) {
  const std::size_t n = a.cols();
  Matrix v = Matrix::identity(n);

  double off = 0.0;
  bool converged = (n < 2);
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    off = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = column_dot(a, i, i);
        const double beta = column_dot(a, j, j);
        const double gamma = column_dot(a, i, j);
        const double scale = std::sqrt(alpha) * std::sqrt(beta);
        if (std::abs(gamma) <= options.tolerance * scale) continue;
        off = std::max(off, std::abs(gamma) / scale);

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::hypot(1.0, zeta));
        const double cs = 1.0 / std::hypot(1.0, t);
        const double sn = cs * t;
        rotate_columns(a, i, j, cs, sn);
        rotate_columns(v, i, j, cs, sn);
      }
    }
    // A sweep without any rotation leaves the columns untouched, so the
    // criterion holds for the returned factors exactly.
    converged = (off == 0.0);
  }
  if (!converged) {
    throw NumericError("svd: one-sided Jacobi did not converge after " +
                           std::to_string(options.max_sweeps) +
                           " sweeps; off-diagonal residual " + std::to_string(off),
                       off);
  }

  RawSvd out{Matrix(a.rows(), n), Vector(n), std::move(v)};
  std::vector<std::size_t> normal;
  std::vector<std::size_t> degenerate;
  for (std::size_t j = 0; j < n; ++j) {
    const double s = std::sqrt(column_dot(a, j, j));
    out.sigma[j] = s;
    if (std::isnormal(s)) {
      for (std::size_t r = 0; r < a.rows(); ++r) out.U(r, j) = a(r, j) / s;
      normal.push_back(j);
    } else {
      out.sigma[j] = 0.0;
      degenerate.push_back(j);
    }
  }
  for (std::size_t j : degenerate) {
    complete_column(out.U, j, normal);
    normal.push_back(j);
  }
  return out;
}

}  // namespace

SvdFactors svd(const Matrix& w, const SvdOptions& options) {
  if (w.empty()) throw DimensionError("svd: empty matrix");

  const bool wide = w.rows() < w.cols();
  RawSvd raw = jacobi_tall(wide ? w.transposed() : w, options);
  if (wide) std::swap(raw.U, raw.V);

  const std::size_t p = raw.sigma.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return raw.sigma[x] > raw.sigma[y];
  });

  SvdFactors f{Matrix(w.rows(), p), Vector(p), Matrix(w.cols(), p)};
  for (std::size_t out = 0; out < p; ++out) {
    const std::size_t src = order[out];
    std::size_t lead = 0;
    for (std::size_t r = 1; r < w.rows(); ++r) {
      if (std::abs(raw.U(r, src)) > std::abs(raw.U(lead, src))) lead = r;
    }
    const double sign = raw.U(lead, src) < 0.0 ? -1.0 : 1.0;
    f.sigma[out] = raw.sigma[src];
    for (std::size_t r = 0; r < w.rows(); ++r) f.U(r, out) = sign * raw.U(r, src);
    for (std::size_t r = 0; r < w.cols(); ++r) f.V(r, out) = sign * raw.V(r, src);
  }
  return f;
}

TruncatedSvd truncate_svd(const SvdFactors& factors, std::size_t r) {
  const std::size_t p = factors.sigma.size();
  if (r < 1 || r > p) {
    throw RangeError("truncate_svd: rank r=" + std::to_string(r) +
                     " outside [1, p=" + std::to_string(p) + "]");
  }
  TruncatedSvd t{Matrix(factors.U.rows(), r),
                 Vector(factors.sigma.begin(), factors.sigma.begin() + r),
                 Matrix(factors.V.rows(), r)};
  for (std::size_t i = 0; i < factors.U.rows(); ++i)
    for (std::size_t c = 0; c < r; ++c) t.U(i, c) = factors.U(i, c);
  for (std::size_t i = 0; i < factors.V.rows(); ++i)
    for (std::size_t c = 0; c < r; ++c) t.V(i, c) = factors.V(i, c);
  return t;
}

namespace {

Matrix usv(const Matrix& u, std::span<const double> sigma, const Matrix& v) {
  Matrix out(u.rows(), v.rows());
  for (std::size_t c = 0; c < sigma.size(); ++c) {
    for (std::size_t i = 0; i < u.rows(); ++i) {
      const double us = u(i, c) * sigma[c];
      for (std::size_t j = 0; j < v.rows(); ++j) out(i, j) += us * v(j, c);
    }
  }
  return out;
}

}  // namespace

Matrix TruncatedSvd::reconstruct() const { return usv(U, sigma, V); }

Matrix reconstruct(const SvdFactors& factors) {
  return usv(factors.U, factors.sigma, factors.V);
}

}  // namespace dude

#pragma once

#include <cstdint>
#include <random>

#include "dude/matrix.hpp"

namespace dude::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline std::size_t uniform_size(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// max |MᵀM − I|
inline double orthogonality_defect(const Matrix& m) {
  const Matrix g = matmul(m.transposed(), m);
  return max_abs_difference(g, Matrix::identity(g.rows()));
}

}  // namespace dude::testing

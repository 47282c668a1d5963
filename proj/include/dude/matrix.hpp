#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dude {

using Vector = std::vector<double>;

//
// Dense row-major matrix of doubles.
//
// Constructors reject non-finite entries. A default-constructed matrix is
// the 0x0 "absent" matrix; every other shape must be at least 1x1.
// Element access through operator() is unchecked so that optimizers and
// finite-difference probes can mutate entries in place.
//
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Vector column(std::size_t c) const;
  Matrix transposed() const;

  // "3x4"
  std::string shape() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
// aᵀ·x without forming the transpose.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
// x·yᵀ
Matrix outer(std::span<const double> x, std::span<const double> y);

Vector column_norms(const Matrix& w);
double frobenius_norm(const Matrix& w);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// ‖a − b‖_F / max(1, ‖b‖_F)
double relative_frobenius_error(const Matrix& a, const Matrix& b);
// max_ij |a_ij − b_ij|
double max_abs_difference(const Matrix& a, const Matrix& b);

}  // namespace dude

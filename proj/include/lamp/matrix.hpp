#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lamp {

// Dense row-major matrix of doubles. Column vectors are n x 1, row vectors
// 1 x n, scalars 1 x 1.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// C (+)= op(A) * op(B) where op is optional transposition.
void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c, bool accumulate);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace lamp

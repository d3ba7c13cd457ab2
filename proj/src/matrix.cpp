#include "lamp/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "lamp/error.hpp"

namespace lamp {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ShapeError("matrix data size does not match shape");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
  Matrix m;
  m.rows = rs.size();
  m.cols = rs.size() ? rs.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rs) {
    if (r.size() != m.cols) throw ShapeError("ragged matrix literal");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data.begin(), data.end(), v); }

void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& c, bool accumulate) {
  const std::size_t m = trans_a ? a.cols : a.rows;
  const std::size_t k = trans_a ? a.rows : a.cols;
  const std::size_t kb = trans_b ? b.cols : b.rows;
  const std::size_t n = trans_b ? b.rows : b.cols;
  if (k != kb) throw ShapeError("gemm: inner dimensions differ");
  if (!accumulate) c = Matrix(m, n);
  if (c.rows != m || c.cols != n) throw ShapeError("gemm: output shape mismatch");

  double* out = c.data.data();
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = out + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        if (av == 0.0) continue;
        const double* brow = pb + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (trans_a && !trans_b) {
    // a is k x m
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = pa + p * m;
      const double* brow = pb + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = arow[i];
        if (av == 0.0) continue;
        double* crow = out + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // b is n x k
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = pa + i * k;
      double* crow = out + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = pb + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        crow[j] += s;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = out + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += pa[p * m + i] * pb[j * k + p];
        crow[j] += s;
      }
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  gemm(a, false, b, false, c, false);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data.begin(), m.data.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

}  // namespace lamp

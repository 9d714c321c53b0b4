#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "eamarl/contract.hpp"

namespace eamarl {

// Dense row-major matrix of doubles. The only container the networks use.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }

  void fill(double v) { data.assign(data.size(), v); }
};

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double sum_squares(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return s;
}

inline double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

namespace matdetail {

// Fixed-order dot product over eight independent accumulator lanes. The
// lanes break the additive dependency chain so the compiler can keep the
// FMA pipes busy without being licensed to reassociate anything; the
// summation order is part of the function's contract and never varies
// between calls.
inline double dot(const double* a, const double* b, std::size_t k) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0, l4 = 0, l5 = 0, l6 = 0, l7 = 0;
  std::size_t t = 0;
  for (; t + 8 <= k; t += 8) {
    l0 += a[t + 0] * b[t + 0];
    l1 += a[t + 1] * b[t + 1];
    l2 += a[t + 2] * b[t + 2];
    l3 += a[t + 3] * b[t + 3];
    l4 += a[t + 4] * b[t + 4];
    l5 += a[t + 5] * b[t + 5];
    l6 += a[t + 6] * b[t + 6];
    l7 += a[t + 7] * b[t + 7];
  }
  double acc = ((l0 + l1) + (l2 + l3)) + ((l4 + l5) + (l6 + l7));
  for (; t < k; ++t) acc += a[t] * b[t];
  return acc;
}

}  // namespace matdetail

// out = a * b^T + broadcast bias. a is [m x k], b is [n x k], out is [m x n].
// Row-times-row dot products; both operands stream contiguously, which is
// what the batch-by-weight products in the MLP need to stay vectorized.
inline void mul_nt(const Matrix& a, const Matrix& b, Matrix& out,
                   const std::vector<double>* bias = nullptr) {
  require(a.cols == b.cols, "mul_nt: inner dimensions differ");
  if (bias) require(bias->size() == b.rows, "mul_nt: bias length mismatch");
  out.resize(a.rows, b.rows);
  const std::size_t k = a.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double acc = matdetail::dot(ai, b.row(j), k);
      oi[j] = bias ? acc + (*bias)[j] : acc;
    }
  }
}

// out = a * b. a is [m x k], b is [k x n], out is [m x n]. axpy over rows of b.
inline void mul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.cols == b.rows, "mul_nn: inner dimensions differ");
  out.resize(a.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t t = 0; t < a.cols; ++t) {
      const double s = ai[t];
      const double* bt = b.row(t);
      for (std::size_t j = 0; j < n; ++j) oi[j] += s * bt[j];
    }
  }
}

// out = a^T * b. a is [k x m], b is [k x n], out is [m x n].
// Used for weight gradients (cotangent^T times activations).
inline void mul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  require(a.rows == b.rows, "mul_tn: inner dimensions differ");
  out.resize(a.cols, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t t = 0; t < a.rows; ++t) {
    const double* at = a.row(t);
    const double* bt = b.row(t);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double s = at[i];
      double* oi = out.row(i);
      for (std::size_t j = 0; j < n; ++j) oi[j] += s * bt[j];
    }
  }
}

inline void col_sums(const Matrix& a, std::vector<double>& out) {
  out.assign(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) out[j] += ai[j];
  }
}

}  // namespace eamarl

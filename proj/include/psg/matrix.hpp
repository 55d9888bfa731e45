#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "psg/common.hpp"
#include "psg/rng.hpp"

namespace psg {

/// Dense row-major matrix. All model parameters and activations use this;
/// Scalar is double in production and long double in numeric oracles.
template <typename Scalar = double>
struct Matrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<Scalar> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  Scalar& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  Scalar operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  const Scalar* row(std::size_t i) const { return data.data() + i * cols; }
  Scalar* row(std::size_t i) { return data.data() + i * cols; }

  void fill(Scalar v) {
    for (auto& x : data) x = v;
  }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (auto& x : data) x = Scalar(rng.uniform_real(lo, hi));
  }

  Scalar frob_sq() const {
    Scalar s = 0;
    for (Scalar x : data) s += x * x;
    return s;
  }

  bool all_finite() const {
    for (Scalar x : data)
      if (!std::isfinite(double(x))) return false;
    return true;
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

template <typename Scalar>
using Vec = std::vector<Scalar>;

// y = W x
template <typename Scalar>
Vec<Scalar> matvec(const Matrix<Scalar>& w, const Vec<Scalar>& x) {
  if (x.size() != w.cols) throw ValidationError("matvec: dimension mismatch");
  Vec<Scalar> y(w.rows, 0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const Scalar* wr = w.row(i);
    Scalar s = 0;
    for (std::size_t j = 0; j < w.cols; ++j) s += wr[j] * x[j];
    y[i] = s;
  }
  return y;
}

// y = W^T x
template <typename Scalar>
Vec<Scalar> matvec_transposed(const Matrix<Scalar>& w, const Vec<Scalar>& x) {
  if (x.size() != w.rows)
    throw ValidationError("matvec_transposed: dimension mismatch");
  Vec<Scalar> y(w.cols, 0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const Scalar* wr = w.row(i);
    Scalar xi = x[i];
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += wr[j] * xi;
  }
  return y;
}

// W += scale * g x^T
template <typename Scalar>
void add_outer(Matrix<Scalar>& w, const Vec<Scalar>& g, const Vec<Scalar>& x,
               Scalar scale = 1) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    Scalar* wr = w.row(i);
    Scalar gi = g[i] * scale;
    for (std::size_t j = 0; j < w.cols; ++j) wr[j] += gi * x[j];
  }
}

template <typename Scalar>
Vec<Scalar> hadamard(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  Vec<Scalar> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

template <typename Scalar>
Vec<Scalar> relu(const Vec<Scalar>& x) {
  Vec<Scalar> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0;
  return y;
}

/// Gradient through Relu with the subgradient at 0 taken as 0: post > 0
/// exactly when pre > 0, so the stored post-activation carries the mask.
template <typename Scalar>
Vec<Scalar> relu_backward(const Vec<Scalar>& grad, const Vec<Scalar>& post) {
  Vec<Scalar> y(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i)
    y[i] = post[i] > 0 ? grad[i] : 0;
  return y;
}

template <typename To, typename From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
  Matrix<To> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) out.data[i] = To(m.data[i]);
  return out;
}

}  // namespace psg

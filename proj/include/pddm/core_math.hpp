#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "pddm/errors.hpp"

namespace pddm {

using Vec = std::vector<double>;

// Row-major dense matrix; rows = output dimension.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Below this norm, l2_normalize refuses rather than clamps: degenerate
// embeddings must surface, not hide.
inline constexpr double kNormEpsilon = 1e-12;

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: lengths differ (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

// y = Wx + b
inline Vec affine(const Vec& x, const Matrix& w, const Vec& b) {
  if (w.cols != x.size()) {
    throw DimensionError("affine: W is " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols) + " but x has length " +
                         std::to_string(x.size()));
  }
  if (b.size() != w.rows) {
    throw DimensionError("affine: b has length " + std::to_string(b.size()) +
                         " but W has " + std::to_string(w.rows) + " rows");
  }
  Vec y(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double s = b[r];
    const double* row = &w.data[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

struct AffineGrads {
  Matrix d_w;  // d_out * x^T
  Vec d_b;     // d_out
  Vec d_x;     // W^T * d_out
};

inline AffineGrads affine_backward(const Vec& x, const Matrix& w, const Vec& d_out) {
  if (w.cols != x.size() || d_out.size() != w.rows) {
    throw DimensionError("affine_backward: W is " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols) + ", x has length " +
                         std::to_string(x.size()) + ", d_out has length " +
                         std::to_string(d_out.size()));
  }
  AffineGrads g;
  g.d_w = Matrix(w.rows, w.cols);
  for (std::size_t r = 0; r < w.rows; ++r)
    for (std::size_t c = 0; c < w.cols; ++c) g.d_w(r, c) = d_out[r] * x[c];
  g.d_b = d_out;
  g.d_x.assign(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = &w.data[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) g.d_x[c] += row[c] * d_out[r];
  }
  return g;
}

inline Vec relu(const Vec& x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

// Subgradient at 0 is 0.
inline Vec relu_backward(const Vec& x, const Vec& d_out) {
  if (x.size() != d_out.size()) {
    throw DimensionError("relu_backward: lengths differ (" + std::to_string(x.size()) +
                         " vs " + std::to_string(d_out.size()) + ")");
  }
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? d_out[i] : 0.0;
  return g;
}

inline Vec l2_normalize(const Vec& x) {
  double n = norm2(x);
  if (!(n > kNormEpsilon)) {
    throw DegenerateInputError("l2_normalize: vector norm " + std::to_string(n) +
                               " below " + std::to_string(kNormEpsilon));
  }
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / n;
  return y;
}

// Jacobian of x/||x|| applied to d_out: (d_out - xhat (xhat . d_out)) / ||x||.
inline Vec l2_normalize_backward(const Vec& x, const Vec& d_out) {
  if (x.size() != d_out.size()) {
    throw DimensionError("l2_normalize_backward: lengths differ (" +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(d_out.size()) + ")");
  }
  double n = norm2(x);
  if (!(n > kNormEpsilon)) {
    throw DegenerateInputError("l2_normalize_backward: vector norm below tolerance");
  }
  double radial = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) radial += (x[i] / n) * d_out[i];
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = (d_out[i] - (x[i] / n) * radial) / n;
  return g;
}

inline double euclidean_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("euclidean_distance: lengths differ (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Central-difference gradient oracle: (f(t + h e_i) - f(t - h e_i)) / 2h.
// Every hand-derived backward pass in the engine is checked against this.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      Vec theta, double h) {
  if (!(h > 0.0)) throw InputError("finite_difference_gradient: step must be positive");
  Vec grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double saved = theta[i];
    theta[i] = saved + h;
    double fp = f(theta);
    theta[i] = saved - h;
    double fm = f(theta);
    theta[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw InputError("finite_difference_gradient: non-finite function value at index " +
                       std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace pddm

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mfnet/common.hpp"

namespace mfnet {

using VecD = std::vector<double>;

/// Dense row-major matrix of doubles.  Deliberately minimal: storage,
/// element access, and the handful of entrywise helpers the solvers need.
struct Matrix {
  int rows = 0;
  int cols = 0;
  VecD a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw ShapeError("Matrix: negative dimension");
  }

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

  size_t size() const { return a.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline double max_abs_diff(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) m = std::max(m, std::fabs(x.a[i] - y.a[i]));
  return m;
}

inline double mean_abs_diff(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw ShapeError("mean_abs_diff: shape mismatch");
  if (x.a.empty()) return 0.0;
  double s = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) s += std::fabs(x.a[i] - y.a[i]);
  return s / static_cast<double>(x.a.size());
}

}  // namespace mfnet

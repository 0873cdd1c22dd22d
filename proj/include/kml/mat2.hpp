#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "kml/error.hpp"

namespace kml {

/// Dense 2x2 real matrix, row-major. Used for mixed (1,1) tensors at a point.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }

  constexpr double trace() const { return a11 + a22; }
  constexpr double det() const { return a11 * a22 - a12 * a21; }

  Mat2 inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) throw SolverError("Mat2::inverse: singular matrix");
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
  }

  /// Real parts of the eigenvalues, ascending. The discriminant is clamped at
  /// zero: callers only use this for operators that are self-adjoint with
  /// respect to some inner product.
  std::array<double, 2> eigenvalues() const {
    const double half = 0.5 * trace();
    const double disc = std::max(0.0, half * half - det());
    const double r = std::sqrt(disc);
    return {half - r, half + r};
  }

  double max_abs() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
  }

  friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
  }
  friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& a) {
    return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
  }
  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
  }
};

}  // namespace kml

#pragma once

// Maps of the torus homotopic to the identity, stored as periodic
// displacements: theta -> theta + d(theta).

#include <array>
#include <cmath>
#include <string>

#include "kml/error.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

struct Displacement {
  PeriodicField d1, d2;

  static Displacement identity(const Grid& g) { return {PeriodicField(g), PeriodicField(g)}; }
  const Grid& grid() const { return d1.grid(); }
  double max_abs() const { return std::max(d1.max_abs(), d2.max_abs()); }
};

/// det(I + grad d) at every grid point.
inline PeriodicField jacobian_determinant(const Displacement& map) {
  const CovectorField g1 = spectral_gradient(map.d1);
  const CovectorField g2 = spectral_gradient(map.d2);
  PeriodicField out(map.grid());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = (1.0 + g1.d1[k]) * (1.0 + g2.d2[k]) - g1.d2[k] * g2.d1[k];
  return out;
}

/// f(theta + d(theta)) at the grid points, by trigonometric interpolation.
inline PeriodicField compose(const PeriodicField& f, const Displacement& map) {
  const TrigInterpolant interp(f);
  const Grid& g = f.grid();
  PeriodicField out(g);
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j)
      out(i, j) = interp(g.theta1(i) + map.d1(i, j), g.theta2(j) + map.d2(i, j));
  return out;
}

/// Displacement of the inverse map, found pointwise by Newton iteration on the
/// trigonometric interpolant: for each grid point y solve x + d(x) = y.
inline Displacement invert(const Displacement& map, double tol = 1e-12, int max_iter = 50) {
  const Grid& g = map.grid();
  const CovectorField g1 = spectral_gradient(map.d1);
  const CovectorField g2 = spectral_gradient(map.d2);
  const std::array<const PeriodicField*, 6> fields{&map.d1, &map.d2, &g1.d1,
                                                   &g1.d2,  &g2.d1,  &g2.d2};
  const TrigInterpolant interp(fields);
  Displacement inv = Displacement::identity(g);
  std::array<double, 6> val{};
  for (int i = 0; i < g.n1(); ++i) {
    for (int j = 0; j < g.n2(); ++j) {
      const double y1 = g.theta1(i), y2 = g.theta2(j);
      double x1 = y1 - map.d1(i, j), x2 = y2 - map.d2(i, j);
      bool converged = false;
      for (int it = 0; it < max_iter; ++it) {
        interp.evaluate(x1, x2, val);
        const double r1 = x1 + val[0] - y1;
        const double r2 = x2 + val[1] - y2;
        if (std::max(std::abs(r1), std::abs(r2)) <= tol) {
          converged = true;
          break;
        }
        const Mat2 jac{1.0 + val[2], val[3], val[4], 1.0 + val[5]};
        const Mat2 jinv = jac.inverse();
        x1 -= jinv.a11 * r1 + jinv.a12 * r2;
        x2 -= jinv.a21 * r1 + jinv.a22 * r2;
      }
      if (!converged)
        throw SolverError("map inversion: Newton iteration did not converge at grid point (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      inv.d1(i, j) = x1 - y1;
      inv.d2(i, j) = x2 - y2;
    }
  }
  return inv;
}

}  // namespace kml

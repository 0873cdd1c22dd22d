#pragma once

// Mass functionals: static Brown-York mass of a boundary surface, the
// quasi-local series along the extension, the total mass of the extension,
// the mass aspect read off from a metric expansion, and the Penrose bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "kml/bst_extension.hpp"
#include "kml/error.hpp"
#include "kml/kottler_geometry.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

inline constexpr double kPi = std::numbers::pi;

/// (1/8 pi) int V (H0 - H_phys) dA over the reference surface, with H0, V and
/// the area element taken from geom.
inline double static_brown_york(const SurfaceGeometry& geom, const PeriodicField& H_phys) {
  if (!(H_phys.min() > 0.0)) throw HypothesisError("static Brown-York mass: H_phys > 0 fails");
  PeriodicField density(geom.grid());
  for (std::size_t k = 0; k < density.size(); ++k)
    density[k] = geom.V[k] * (geom.H[k] - H_phys[k]) * geom.area_density[k];
  return integrate_area(density) / (8.0 * kPi);
}

struct SeriesPoint {
  double t = 0.0;
  double m = 0.0;
};

/// m(t) = (1/8 pi) int V_t (H_t - H_t / w) dA_t at every extension snapshot.
/// With V = e^v, dA = rho e^{2v} dA_sigma and 1 - 1/w = e^{-3t} z / w the
/// integrand is e^{3u} rho H z / w, free of cancellation.
inline std::vector<SeriesPoint> quasilocal_series(const ExtensionTrajectory& ext) {
  std::vector<SeriesPoint> out;
  for (std::size_t k = 0; k < ext.size(); ++k) {
    const double t = ext.times[k];
    const PeriodicField& u = ext.u_snapshots[k];
    const PeriodicField& z = ext.z_snapshots[k];
    const PeriodicField& w = ext.w_snapshots[k];
    const SurfaceGeometry geom = surface_geometry({u + t});
    PeriodicField density(u.grid());
    for (std::size_t p = 0; p < density.size(); ++p)
      density[p] = std::exp(3.0 * u[p]) * geom.rho[p] * geom.H[p] * z[p] / w[p];
    out.push_back({t, integrate_area(density) / (8.0 * kPi)});
  }
  return out;
}

/// Largest increase between consecutive series values (0 if nonincreasing).
inline double monotonicity_violation(const std::vector<SeriesPoint>& series) {
  double worst = 0.0;
  for (std::size_t k = 1; k < series.size(); ++k) worst = std::max(worst, series[k].m - series[k - 1].m);
  return worst;
}

/// m(g+) = (1/4 pi) int w_inf dA_sigma.
inline double total_mass_from_w_infinity(const PeriodicField& w_inf) {
  return integrate_area(w_inf) / (4.0 * kPi);
}

inline double total_mass_from_w_infinity(const WInfinity& w) { return total_mass_from_w_infinity(w.w_inf); }

/// Tangential metric components sampled on the level set {r = const}.
struct RadialMetricSample {
  double r = 0.0;
  SymTensorField g;
};

struct MassAspect {
  PeriodicField trace;         // Tr_sigma(3 m)
  double mass = 0.0;           // (1/16 pi) int Tr_sigma(3 m) dA_sigma
  double max_residual = 0.0;   // worst fit residual relative to e^{2r}
  double condition = 0.0;      // condition number of the scaled fit
};

/// Fits g_ij(r) = a_ij e^{2r} + m_ij e^{-r} per point and component by least
/// squares with rows scaled by e^{-2r} (so higher-order terms enter as
/// residuals), and integrates the trace of the e^{-r} coefficient.
inline MassAspect mass_aspect_from_expansion(const std::vector<RadialMetricSample>& samples,
                                             double max_condition = 1e8) {
  if (samples.size() < 3) throw UsageError("mass aspect: need samples at three or more radii");
  const Grid& grid = samples.front().g.c11.grid();
  const std::size_t n = samples.size();

  // Basis after row scaling: {1, x_k} with x_k = e^{-3 r_k}, then columns
  // scaled to unit max norm for the conditioning check.
  std::vector<double> x(n);
  double xmax = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = std::exp(-3.0 * samples[k].r);
    xmax = std::max(xmax, x[k]);
  }
  double xbar = 0.0;
  for (double v : x) xbar += v / xmax;
  xbar /= static_cast<double>(n);
  double sxx = 0.0;
  for (double v : x) sxx += (v / xmax - xbar) * (v / xmax - xbar);
  // Normal matrix of the scaled basis, eigenvalue ratio.
  const double a = static_cast<double>(n), b = xbar * a;
  double c = 0.0;
  for (double v : x) c += (v / xmax) * (v / xmax);
  const double half = 0.5 * (a + c), disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
  const double lo = half - disc, hi = half + disc;
  const double cond = lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition) || !(sxx > 0.0))
    throw SolverError("mass aspect: ill-conditioned fit (radii too close), condition " + std::to_string(cond));
  MassAspect out{PeriodicField(grid), 0.0, 0.0, cond};

  const auto [i11, i12, i22] = grid.torus().inverse();
  auto fit = [&](auto component, std::size_t p) {
    double ybar = 0.0;
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      y[k] = component(samples[k].g)[p] * std::exp(-2.0 * samples[k].r);
      ybar += y[k];
    }
    ybar /= static_cast<double>(n);
    double sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) sxy += (x[k] / xmax - xbar) * (y[k] - ybar);
    const double slope = sxy / sxx;  // coefficient of x / xmax
    const double icpt = ybar - slope * xbar;
    for (std::size_t k = 0; k < n; ++k)
      out.max_residual = std::max(out.max_residual, std::abs(y[k] - icpt - slope * x[k] / xmax));
    return slope / xmax;
  };
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double m11 = fit([](const SymTensorField& g) -> const PeriodicField& { return g.c11; }, p);
    const double m12 = fit([](const SymTensorField& g) -> const PeriodicField& { return g.c12; }, p);
    const double m22 = fit([](const SymTensorField& g) -> const PeriodicField& { return g.c22; }, p);
    out.trace[p] = 3.0 * (i11 * m11 + 2.0 * i12 * m12 + i22 * m22);
  }
  out.mass = integrate_area(out.trace) / (16.0 * kPi);
  return out;
}

struct InequalityReport {
  double lhs = 0.0;      // (1/8 pi) int V H0 (1 - 1/w0) dA
  double m_total = 0.0;
  double gap = 0.0;      // lhs - m_total
};

/// Compares the static Brown-York side with the total mass of the extension
/// started from w0 = H0 / H_phys.
inline InequalityReport shi_tam_inequality_report(const SurfaceGeometry& geom, const PeriodicField& H_phys,
                                                  const PeriodicField& w0, double m_total) {
  if (!(H_phys.min() > 0.0)) throw HypothesisError("inequality report: H_phys > 0 fails");
  PeriodicField density(geom.grid());
  for (std::size_t k = 0; k < density.size(); ++k) {
    const double expected = geom.H[k] / H_phys[k];
    if (std::abs(w0[k] - expected) > 1e-12 * std::max(1.0, std::abs(expected)))
      throw UsageError("inequality report: w0 must equal H0 / H_phys");
    // 1 - 1/w0 = (H0 - H_phys) / H0
    density[k] = geom.V[k] * (geom.H[k] - H_phys[k]) * geom.area_density[k];
  }
  InequalityReport r;
  r.lhs = integrate_area(density) / (8.0 * kPi);
  r.m_total = m_total;
  r.gap = r.lhs - m_total;
  return r;
}

/// C |Sigma_h| / (16 pi).
inline double penrose_bound(double C, double area) {
  if (!(C >= 0.0) || !(area > 0.0)) throw UsageError("penrose_bound: need C >= 0 and area > 0");
  return C * area / (16.0 * kPi);
}

}  // namespace kml

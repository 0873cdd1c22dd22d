#pragma once

// Closed-form data of the Horowitz-Myers geon
//   dr^2 / (r^2 (1 - r^{-3})) + r^2 (1 - r^{-3}) dxi^2 + r^2 dtheta^2,
// static with V = r, on the shell r_h <= r <= r_0 with coordinate periods
// P_xi, P_theta.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "kml/error.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

struct GeonConfig {
  double r_h = 1.0;
  double r_0 = 4.0;
  double P_xi = 4.0 * std::numbers::pi / 3.0;
  double P_theta = 2.0 * std::numbers::pi;

  void validate() const {
    if (!(r_h >= 1.0)) throw UsageError("geon: r_h must be at least 1");
    if (!(r_0 > r_h)) throw UsageError("geon: r_0 must exceed r_h");
    if (!(P_xi > 0.0 && P_theta > 0.0)) throw UsageError("geon: periods must be positive");
  }

  /// The metric closes off smoothly at r = 1 only for P_xi = 4 pi / 3.
  bool smooth_closure() const { return std::abs(P_xi - 4.0 * std::numbers::pi / 3.0) <= 1e-12; }
  bool solid_torus() const { return r_h == 1.0; }
};

/// Mean curvature of {r = const} toward increasing r:
/// (1 - r^{-3})^{-1/2} (2 - r^{-3} / 2). Infinite at r = 1.
inline double geon_mean_curvature(double r) {
  const double x = 1.0 / (r * r * r);
  return (2.0 - 0.5 * x) / std::sqrt(1.0 - x);
}

/// 2 - H(r) without cancellation for large r.
inline double geon_mean_curvature_deficit(double r) {
  const double x = 1.0 / (r * r * r), sf = std::sqrt(1.0 - x);
  return x * (0.5 - 2.0 / (1.0 + sf)) / sf;
}

struct GeonBoundary {
  double V_outer = 0.0;
  double H_outer = 0.0;
  double area_outer = 0.0;
  // Inner boundary {r = r_h}; absent when r_h = 1, where the circle of xi
  // degenerates and the shell closes off into a solid torus.
  std::optional<double> H_inner_increasing_r;
  std::optional<double> H_inner_decreasing_r;
  std::optional<double> area_inner;
  bool inner_degenerate = false;
};

inline GeonBoundary geon_boundary_geometry(const GeonConfig& cfg) {
  cfg.validate();
  GeonBoundary b;
  const double P = cfg.P_xi * cfg.P_theta;
  auto area = [P](double r) { return r * r * std::sqrt(1.0 - 1.0 / (r * r * r)) * P; };
  b.V_outer = cfg.r_0;
  b.H_outer = geon_mean_curvature(cfg.r_0);
  b.area_outer = area(cfg.r_0);
  if (cfg.solid_torus()) {
    b.inner_degenerate = true;
  } else {
    b.H_inner_increasing_r = geon_mean_curvature(cfg.r_h);
    b.H_inner_decreasing_r = -*b.H_inner_increasing_r;
    b.area_inner = area(cfg.r_h);
  }
  return b;
}

struct GeonMass {
  double m_exact = 0.0;
  double m_leading = 0.0;  // -P_xi P_theta / (16 pi)
  double remainder = 0.0;  // m_exact - m_leading
};

/// Static Brown-York mass of the outer boundary with reference mean
/// curvature 2 (the boundary torus is a level set of the Kottler manifold).
/// With x = r_0^{-3} and f = 1 - x the closed form reduces to
/// m = (P / 8 pi)(1/2 - 2 / (1 + sqrt f)), remainder = -(P / 8 pi) x / (1 + sqrt f)^2.
inline GeonMass geon_static_mass(const GeonConfig& cfg) {
  cfg.validate();
  const double P = cfg.P_xi * cfg.P_theta;
  const double x = 1.0 / (cfg.r_0 * cfg.r_0 * cfg.r_0), sf = std::sqrt(1.0 - x);
  const double k = P / (8.0 * std::numbers::pi);
  GeonMass m;
  m.m_exact = k * (0.5 - 2.0 / (1.0 + sf));
  m.m_leading = -P / (16.0 * std::numbers::pi);
  m.remainder = -k * x / ((1.0 + sf) * (1.0 + sf));
  return m;
}

struct CounterexampleReport {
  bool mass_negative = false;
  bool trapping_violated = false;  // H > 2 on the inner boundary (toward increasing r)
  bool homotopy_case = false;      // r_h = 1: no inner boundary
  double m_exact = 0.0;
  std::optional<double> H_inner;
};

inline CounterexampleReport counterexample_report(const GeonConfig& cfg) {
  const GeonBoundary b = geon_boundary_geometry(cfg);
  const GeonMass m = geon_static_mass(cfg);
  CounterexampleReport r;
  r.m_exact = m.m_exact;
  r.mass_negative = m.m_exact < 0.0;
  r.homotopy_case = cfg.solid_torus();
  r.H_inner = b.H_inner_increasing_r;
  r.trapping_violated = b.H_inner_increasing_r && *b.H_inner_increasing_r > 2.0;
  return r;
}

/// Flat metric on the fixed-period torus [0, 2 pi)^2 whose level set
/// {s = ln r_0} in the Kottler manifold is isometric to the outer boundary:
/// theta^1 = 2 pi xi / P_xi, theta^2 = 2 pi theta / P_theta.
inline FlatTorus geon_reference_torus(const GeonConfig& cfg) {
  cfg.validate();
  const double a = cfg.P_xi / (2.0 * std::numbers::pi), c = cfg.P_theta / (2.0 * std::numbers::pi);
  return {(1.0 - 1.0 / (cfg.r_0 * cfg.r_0 * cfg.r_0)) * a * a, 0.0, c * c};
}

struct GeonSweepRow {
  double r_0 = 0.0;
  double H_outer = 0.0;
  double m_exact = 0.0;
  double remainder = 0.0;
};

struct GeonSweep {
  std::vector<GeonSweepRow> rows;
  double slope = 0.0;  // least-squares slope of log|remainder| against log r_0
};

inline GeonSweep geon_sweep(GeonConfig cfg, const std::vector<double>& radii) {
  if (radii.size() < 2) throw UsageError("geon sweep: need at least two radii");
  GeonSweep s;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double r : radii) {
    cfg.r_0 = r;
    const GeonMass m = geon_static_mass(cfg);
    s.rows.push_back({r, geon_mean_curvature(r), m.m_exact, m.remainder});
    const double lx = std::log(r), ly = std::log(std::abs(m.remainder));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(radii.size());
  s.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return s;
}

}  // namespace kml

#pragma once

// Unit normal flow of a graphical torus in the Kottler manifold. The graph
// height is evolved Eulerian on the fixed theta grid as u = v - t, so that
// du/dt = rho - 1 carries no large constant drift. The tangential
// reparametrization Theta(t, .) is carried by its inverse map, which obeys
// a transport equation on the same grid; Theta itself is recovered by
// Newton inversion when needed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kml/error.hpp"
#include "kml/kottler_geometry.hpp"
#include "kml/mat2.hpp"
#include "kml/periodic_map.hpp"
#include "kml/rk4.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

struct FlowParams {
  double t_max = 8.0;
  double dt = 1e-3;
  int snapshot_stride = 100;

  void validate() const {
    if (!(t_max > 0.0)) throw UsageError("flow: t_max must be positive");
    if (!(dt > 0.0 && dt <= 0.05)) throw UsageError("flow: dt must lie in (0, 0.05]");
    if (snapshot_stride < 1) throw UsageError("flow: snapshot_stride must be at least 1");
    steps();
  }

  /// Number of steps; t_max must be an integer multiple of dt.
  long steps() const {
    const double r = t_max / dt;
    const long n = std::lround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * r)
      throw UsageError("flow: t_max must be an integer multiple of dt");
    return n;
  }
};

struct FlowDiagnostics {
  double rho2_minus_1 = 0.0;  // max(rho^2 - 1)
  double umbilic = 0.0;       // max |h - gamma|_gamma
  double v_min = 0.0;
  double v_max = 0.0;
  double min_principal_curvature = 0.0;
  double jacobian_min = 1.0;  // range of det D Theta
  double jacobian_max = 1.0;
};

struct FlowTrajectory {
  GraphSurface initial;
  FlowParams params;
  std::vector<double> times;
  std::vector<PeriodicField> u_snapshots;         // v(t) - t
  std::vector<Displacement> inverse_snapshots;   // Theta(t)^{-1} - id
  std::vector<FlowDiagnostics> diagnostics;

  const Grid& grid() const { return initial.grid(); }
  std::size_t size() const { return times.size(); }

  PeriodicField v(std::size_t k) const { return u_snapshots[k] + times[k]; }

  /// Theta(t_k, .) as a displacement, by Newton inversion of the stored map.
  Displacement theta(std::size_t k) const { return invert(inverse_snapshots[k]); }

  /// Index of the stored snapshot closest to t.
  std::size_t index_near(double t) const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < times.size(); ++k)
      if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
    return best;
  }
};

namespace detail {

struct FlowState {
  PeriodicField u;
  Displacement inv;

  FlowState& axpy(double s, const FlowState& o) {
    u.axpy(s, o.u);
    inv.d1.axpy(s, o.inv.d1);
    inv.d2.axpy(s, o.inv.d2);
    return *this;
  }
};

/// rho - 1 and the tangential velocity U^i = -rho^{-1} e^{-2v} sigma^{ij} v_j,
/// from du and v = u + t. rho - 1 is formed as q / (1 + rho) to avoid
/// cancellation.
struct NormalSpeed {
  PeriodicField rho_minus_1;
  CovectorField U;
};

inline NormalSpeed normal_speed(const PeriodicField& u, const CovectorField& du, double t) {
  const Grid& g = u.grid();
  const auto [i11, i12, i22] = g.torus().inverse();
  NormalSpeed out{PeriodicField(g), {PeriodicField(g), PeriodicField(g)}};
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double v1 = du.d1[k], v2 = du.d2[k];
    const double w1 = i11 * v1 + i12 * v2, w2 = i12 * v1 + i22 * v2;
    const double em2v = std::exp(-2.0 * (u[k] + t));
    const double q = em2v * (v1 * w1 + v2 * w2);
    if (!(q >= -1e-10) || !std::isfinite(q))
      throw SolverError("flow: rho^2 < 1 at time " + std::to_string(t) +
                        " (numerical corruption)");
    const double rho = std::sqrt(1.0 + q);
    out.rho_minus_1[k] = q / (1.0 + rho);
    out.U.d1[k] = -em2v * w1 / rho;
    out.U.d2[k] = -em2v * w2 / rho;
  }
  return out;
}

/// Right-hand side of the transport equation dE/dt = -U - (U . grad) E for the
/// inverse-map displacement E.
inline Displacement inverse_map_rate(const Displacement& inv, const CovectorField& U) {
  const CovectorField g1 = spectral_gradient(inv.d1);
  const CovectorField g2 = spectral_gradient(inv.d2);
  Displacement out{PeriodicField(inv.grid()), PeriodicField(inv.grid())};
  for (std::size_t k = 0; k < out.d1.size(); ++k) {
    const double a = U.d1[k], b = U.d2[k];
    out.d1[k] = -a - (a * g1.d1[k] + b * g1.d2[k]);
    out.d2[k] = -b - (a * g2.d1[k] + b * g2.d2[k]);
  }
  return out;
}

inline FlowState flow_rate(double t, const FlowState& y) {
  const CovectorField du = spectral_gradient(y.u);
  NormalSpeed sp = normal_speed(y.u, du, t);
  return {std::move(sp.rho_minus_1), inverse_map_rate(y.inv, sp.U)};
}

inline FlowDiagnostics flow_diagnostics(const PeriodicField& u, const Displacement& inv, double t) {
  const PeriodicField v = u + t;
  const SurfaceGeometry geom = surface_geometry({v});
  const auto [i11, i12, i22] = v.grid().torus().inverse();
  FlowDiagnostics d;
  d.v_min = v.min();
  d.v_max = v.max();
  d.rho2_minus_1 = 0.0;
  d.min_principal_curvature = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double v1 = geom.dv.d1[k], v2 = geom.dv.d2[k];
    const double q = std::exp(-2.0 * v[k]) * (v1 * (i11 * v1 + i12 * v2) + v2 * (i12 * v1 + i22 * v2));
    d.rho2_minus_1 = std::max(d.rho2_minus_1, q);
    d.min_principal_curvature =
        std::min(d.min_principal_curvature, geom.shape_operator(k).eigenvalues()[0]);
  }
  d.umbilic = geom.umbilic_deviation().max();
  const PeriodicField jac = jacobian_determinant(inv);
  if (!(jac.min() > 0.0))
    throw SolverError("flow: Jacobian of Theta is not positive at time " + std::to_string(t) +
                      " (under-resolved)");
  // det D Theta(x) = 1 / det D Theta^{-1}(Theta(x)).
  d.jacobian_min = 1.0 / jac.max();
  d.jacobian_max = 1.0 / jac.min();
  return d;
}

}  // namespace detail

/// Integrates the unit normal flow from the given graph. Snapshots are taken
/// at t = 0, every snapshot_stride steps, and at t_max.
inline FlowTrajectory run_flow(const GraphSurface& surface, const FlowParams& params) {
  params.validate();
  const AdmissibilityReport adm = admissibility_check(surface_geometry(surface));
  if (!adm.h_posdef || !(adm.H_min > 0.0))
    throw HypothesisError("flow: initial surface is not admissible: " + adm.violation);

  FlowTrajectory traj{surface, params, {}, {}, {}, {}};
  const long n = params.steps();
  detail::FlowState y{surface.v, Displacement::identity(surface.grid())};
  auto record = [&](double t) {
    traj.diagnostics.push_back(detail::flow_diagnostics(y.u, y.inv, t));
    traj.times.push_back(t);
    traj.u_snapshots.push_back(y.u);
    traj.inverse_snapshots.push_back(y.inv);
  };
  record(0.0);
  for (long s = 0; s < n; ++s) {
    const double t = static_cast<double>(s) * params.dt;
    y = rk4_step(y, t, params.dt, detail::flow_rate);
    if (!y.u.all_finite()) throw SolverError("flow: non-finite graph height at time " + std::to_string(t));
    if ((s + 1) % params.snapshot_stride == 0 || s + 1 == n) record(static_cast<double>(s + 1) * params.dt);
  }
  return traj;
}

/// Closed-form shape operator of the flow from initial mixed shape operator h0:
/// h(t) = I + 2 e^{-2t} (h0 - I) [h0 + I - (h0 - I) e^{-2t}]^{-1}.
inline Mat2 exact_shape_operator(const Mat2& h0, double t) {
  const double half = 0.5 * h0.trace();
  const double disc = half * half - h0.det();
  if (disc < -1e-12 * std::max(1.0, half * half) || h0.eigenvalues()[0] < -kPosDefTolerance)
    throw HypothesisError("exact_shape_operator: h0 must have real nonnegative eigenvalues");
  const Mat2 I = Mat2::identity();
  const double e = std::exp(-2.0 * t);
  const Mat2 d = h0 - I;
  const Mat2 bracket = h0 + I - e * d;
  if (std::abs(bracket.det()) < 1e-300)
    throw SolverError("exact_shape_operator: singular bracket");
  return I + (2.0 * e) * (d * bracket.inverse());
}

/// Sup over the grid of |S_flow - S_exact| at snapshot k, where S_flow is the
/// shape operator recomputed from v(t_k) and S_exact transports the initial
/// shape operator along the particle paths:
/// S_exact(theta) = (D Phi)^{-1} h(t, S_0(Phi(theta))) D Phi with Phi = Theta^{-1}.
inline double shape_operator_error(const FlowTrajectory& traj, std::size_t k) {
  const Grid& g = traj.grid();
  const SurfaceGeometry g0 = surface_geometry(traj.initial);
  PeriodicField s11(g), s12(g), s21(g), s22(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Mat2 s = g0.shape_operator(p);
    s11[p] = s.a11;
    s12[p] = s.a12;
    s21[p] = s.a21;
    s22[p] = s.a22;
  }
  const std::array<const PeriodicField*, 4> comps{&s11, &s12, &s21, &s22};
  const TrigInterpolant interp(comps);

  const double t = traj.times[k];
  const Displacement& inv = traj.inverse_snapshots[k];
  const SurfaceGeometry gt = surface_geometry({traj.v(k)});
  const CovectorField e1 = spectral_gradient(inv.d1);
  const CovectorField e2 = spectral_gradient(inv.d2);
  std::array<double, 4> val{};
  double worst = 0.0;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * g.n2() + j;
      interp.evaluate(g.theta1(i) + inv.d1[p], g.theta2(j) + inv.d2[p], val);
      const Mat2 dphi{1.0 + e1.d1[p], e1.d2[p], e2.d1[p], 1.0 + e2.d2[p]};
      const Mat2 pred = dphi.inverse() * exact_shape_operator({val[0], val[1], val[2], val[3]}, t) * dphi;
      worst = std::max(worst, (gt.shape_operator(p) - pred).max_abs());
    }
  return worst;
}

struct FLimit {
  PeriodicField f;              // v(t_max) - t_max
  PeriodicField f_richardson;   // extrapolated assuming e^{-2t} convergence
  double error_estimate = 0.0;  // sup |f(t_max) - f(t_max / 2)|
  double richardson_error = 0.0;
  std::optional<std::string> warning;
};

namespace detail {

/// Limit of a quantity q(t) = q_inf + A e^{-2t} from samples at t1 < t2.
inline double richardson_factor(double t1, double t2) { return 1.0 / std::expm1(2.0 * (t2 - t1)); }

}  // namespace detail

/// The translation limit f = lim (v - t).
inline FLimit extract_f(const FlowTrajectory& traj) {
  const double T = traj.times.back();
  if (T < 6.0 - 1e-12) throw UsageError("extract_f: trajectory must reach t >= 6");
  const std::size_t k2 = traj.size() - 1;
  const std::size_t k1 = traj.index_near(0.5 * T);
  const std::size_t k0 = traj.index_near(0.25 * T);
  if (k1 == k2 || k0 == k1) throw UsageError("extract_f: too few snapshots in the tail");
  const PeriodicField& u2 = traj.u_snapshots[k2];
  const PeriodicField& u1 = traj.u_snapshots[k1];
  const PeriodicField diff = u2 - u1;
  const double r = detail::richardson_factor(traj.times[k1], traj.times[k2]);
  FLimit out{u2, u2 + PeriodicField(diff).map([r](double x) { return r * x; }), diff.max_abs(), r * diff.max_abs(), {}};

  // Predicted ratio of successive tail differences for e^{-2t} convergence.
  const double t0 = traj.times[k0], t1 = traj.times[k1], t2 = traj.times[k2];
  const double predicted = (std::exp(-2.0 * t1) - std::exp(-2.0 * t2)) / (std::exp(-2.0 * t0) - std::exp(-2.0 * t1));
  const double earlier = sup_distance(u1, traj.u_snapshots[k0]);
  if (out.error_estimate > 10.0 * predicted * earlier + 1e-14)
    out.warning = "tail differences of v - t shrink slower than e^{-2t}";
  return out;
}

struct DecayFit {
  std::optional<double> slope;  // empty when the diagnostic is at the round-off floor
  double intercept = 0.0;
  bool at_floor = false;
};

struct DecayReport {
  DecayFit rho;      // max(rho^2 - 1)
  DecayFit umbilic;  // max |h - gamma|_gamma
};

/// Least-squares slope of log(y) against t.
inline DecayFit fit_log_slope(const std::vector<double>& t, const std::vector<double>& y) {
  DecayFit fit;
  for (double v : y)
    if (!(v >= 1e-13)) {
      fit.at_floor = true;
      return fit;
    }
  if (t.size() < 2) throw UsageError("decay fit needs at least two samples");
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double ly = std::log(y[k]);
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  fit.slope = slope;
  fit.intercept = (sy - slope * st) / n;
  return fit;
}

/// Exponential decay rates of the flow diagnostics over the second half of the run.
inline DecayReport decay_report(const FlowTrajectory& traj) {
  const double T = traj.times.back();
  if (T < 6.0 - 1e-12) throw UsageError("decay_report: trajectory must reach t >= 6");
  std::vector<double> t, r, h;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.times[k] < 0.5 * T - 1e-12) continue;
    t.push_back(traj.times[k]);
    r.push_back(traj.diagnostics[k].rho2_minus_1);
    h.push_back(traj.diagnostics[k].umbilic);
  }
  return {fit_log_slope(t, r), fit_log_slope(t, h)};
}

}  // namespace kml

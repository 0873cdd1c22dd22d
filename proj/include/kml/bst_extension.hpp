#pragma once

// Lapse equation H dw/dt = w^2 Delta w + (K + 3)(w - w^3) on the leaves of
// the unit normal flow, its limit at infinity, and the extension metric
// g+ = w^2 dt^2 + gamma_t.
//
// The flow leaves are parametrized by the fixed theta grid (Eulerian), so
// the lapse is stored as a function of theta on each leaf and picks up an
// advection term -U . grad. The unknown actually integrated is
// z = e^{3t}(w - 1), which stays O(1) and is identically zero for w = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kml/error.hpp"
#include "kml/kottler_geometry.hpp"
#include "kml/normal_flow.hpp"
#include "kml/periodic_map.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

/// Uniformly spaced run of dense slices kept for the curvature check.
struct SliceWindow {
  double start = 1.0;
  double spacing = 0.01;
  int slices = 9;
};

struct ExtensionParams {
  double dt = 1e-3;
  int snapshot_stride = 100;
  double stability_factor = 0.2;
  double barrier_slack = 1e-8;
  std::optional<SliceWindow> window;
};

struct ExtensionTrajectory {
  std::vector<double> times;
  std::vector<PeriodicField> w_snapshots;
  std::vector<PeriodicField> z_snapshots;  // e^{3t}(w - 1)
  std::vector<PeriodicField> u_snapshots;  // v - t of the co-integrated flow
  std::vector<std::array<double, 2>> barriers;  // (lower, upper) at each snapshot

  // Dense slices for the curvature check.
  std::vector<double> window_times;
  std::vector<PeriodicField> window_u, window_z;

  double c0 = 0.0;  // sup_t e^{3t} max(|lower - 1|, |upper - 1|)
  double max_barrier_violation = 0.0;
  int max_substeps = 1;

  const Grid& grid() const { return w_snapshots.front().grid(); }
  std::size_t size() const { return times.size(); }
};

namespace detail {

struct LapseState {
  PeriodicField u, z;

  LapseState& axpy(double s, const LapseState& o) {
    u.axpy(s, o.u);
    z.axpy(s, o.z);
    return *this;
  }
};

inline PeriodicField lapse_from_z(const PeriodicField& z, double t) {
  const double e = std::exp(-3.0 * t);
  return z.map([e](double x) { return 1.0 + e * x; });
}

struct LapseRate {
  LapseState rate;
  double eta_min = 0.0, eta_max = 0.0;  // extremes of (K + 3) / H
  double step_cap = 0.0;                // parabolic stability bound on dt
};

inline LapseRate lapse_rate(double t, const LapseState& y, double stability_factor) {
  const Grid& g = y.u.grid();
  const SurfaceGeometry geom = surface_geometry({y.u + t});
  const NormalSpeed sp = normal_speed(y.u, geom.dv, t);
  const CovectorField dz = spectral_gradient(y.z);
  const PeriodicField lap = laplace_beltrami(geom, dz);
  const double e = std::exp(-3.0 * t);

  LapseRate out{{sp.rho_minus_1, PeriodicField(g)}, std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity(), 0.0};
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double H = geom.H[k], K = geom.K[k];
    const double w = 1.0 + e * y.z[k];
    if (!(w > 0.0)) throw SolverError("extension: lapse w <= 0 at time " + std::to_string(t));
    if (!(H > 0.0)) throw HypothesisError("extension: H > 0 fails on the flow at time " + std::to_string(t));
    const double adv = sp.U.d1[k] * dz.d1[k] + sp.U.d2[k] * dz.d2[k];
    out.rate.z[k] = -adv + w * w * lap[k] / H + (3.0 - (K + 3.0) * w * (1.0 + w) / H) * y.z[k];
    out.eta_min = std::min(out.eta_min, (K + 3.0) / H);
    out.eta_max = std::max(out.eta_max, (K + 3.0) / H);
    const Mat2 ginv{geom.gamma_inv.c11[k], geom.gamma_inv.c12[k], geom.gamma_inv.c12[k], geom.gamma_inv.c22[k]};
    worst = std::max(worst, w * w * ginv.eigenvalues()[1] / H);
  }
  const double h = g.spacing();
  out.step_cap = worst > 0.0 ? stability_factor * h * h / worst : std::numeric_limits<double>::infinity();
  return out;
}

/// Barrier solution (1 + C e^{-2 I})^{-1/2} with I the integral of eta.
inline double barrier_value(double C, double integral) { return 1.0 / std::sqrt(1.0 + C * std::exp(-2.0 * integral)); }

/// barrier_value - 1 without cancellation.
inline double barrier_excess(double C, double integral) {
  const double x = C * std::exp(-2.0 * integral);
  const double r = std::sqrt(1.0 + x);
  return -x / (r * (1.0 + r));
}

inline long steps_per(double interval, double dt, const char* what) {
  const double r = interval / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
    throw UsageError(std::string("extension: ") + what + " must be an integer multiple of dt");
  return n;
}

}  // namespace detail

/// Integrates the lapse equation along the flow of flow.initial up to
/// flow.params.t_max, starting from w0 > 0.
inline ExtensionTrajectory solve_w(const FlowTrajectory& flow, const PeriodicField& w0, const ExtensionParams& params) {
  if (!(params.dt > 0.0 && params.dt <= 0.05)) throw UsageError("extension: dt must lie in (0, 0.05]");
  if (params.snapshot_stride < 1) throw UsageError("extension: snapshot_stride must be at least 1");
  if (!(w0.min() > 0.0)) throw HypothesisError("extension: w0 > 0 fails");
  const double t_max = flow.params.t_max;
  const long n = detail::steps_per(t_max, params.dt, "t_max");
  long win_first = -1, win_every = 1;
  if (params.window) {
    if (params.window->slices < 5) throw UsageError("extension: window needs at least 5 slices");
    win_first = detail::steps_per(params.window->start, params.dt, "window start");
    win_every = detail::steps_per(params.window->spacing, params.dt, "window spacing");
    if (win_every < 1 || win_first + win_every * (params.window->slices - 1) > n)
      throw UsageError("extension: window does not fit inside [0, t_max]");
  }

  // Barrier constants from the initial data.
  const double w_lo = w0.min(), w_hi = w0.max();
  const double c_plus = -1.0 + 1.0 / ((w_hi + 1.0) * (w_hi + 1.0));
  const double c_minus = 1.0 / (w_lo * w_lo) - 1.0;
  const bool lower_uses_max = w_lo > 1.0;

  ExtensionTrajectory ext;
  detail::LapseState y{flow.initial.v, (w0 + (-1.0))};
  double int_plus = 0.0, int_minus = 0.0, eta_plus_prev = 0.0, eta_minus_prev = 0.0;
  double lower = detail::barrier_value(c_minus, 0.0), upper = detail::barrier_value(c_plus, 0.0);

  double t_prev = 0.0;
  auto barrier_update = [&](double t, const detail::LapseRate& r, bool first) {
    const double ep = r.eta_min, em = lower_uses_max ? r.eta_max : r.eta_min;
    if (!first) {
      int_plus += 0.5 * (t - t_prev) * (ep + eta_plus_prev);
      int_minus += 0.5 * (t - t_prev) * (em + eta_minus_prev);
    }
    eta_plus_prev = ep;
    eta_minus_prev = em;
    t_prev = t;
    lower = detail::barrier_value(c_minus, int_minus);
    upper = detail::barrier_value(c_plus, int_plus);
    const PeriodicField w = detail::lapse_from_z(y.z, t);
    const double viol = std::max(lower - w.min(), w.max() - upper);
    ext.max_barrier_violation = std::max(ext.max_barrier_violation, viol);
    if (viol > params.barrier_slack)
      throw SolverError("extension: barrier bracketing violated by " + std::to_string(viol) + " at time " +
                        std::to_string(t));
    const double e3 = std::exp(3.0 * t);
    ext.c0 = std::max({ext.c0, e3 * std::abs(detail::barrier_excess(c_minus, int_minus)),
                       e3 * std::abs(detail::barrier_excess(c_plus, int_plus))});
  };

  auto record = [&](double t, long step) {
    if (step % params.snapshot_stride == 0 || step == n) {
      ext.times.push_back(t);
      ext.w_snapshots.push_back(detail::lapse_from_z(y.z, t));
      ext.z_snapshots.push_back(y.z);
      ext.u_snapshots.push_back(y.u);
      ext.barriers.push_back({lower, upper});
    }
    if (params.window && step >= win_first && (step - win_first) % win_every == 0 &&
        (step - win_first) / win_every < params.window->slices) {
      ext.window_times.push_back(t);
      ext.window_u.push_back(y.u);
      ext.window_z.push_back(y.z);
    }
  };

  const auto rhs = [&](double t, const detail::LapseState& s) {
    return detail::lapse_rate(t, s, params.stability_factor).rate;
  };

  detail::LapseRate r0 = detail::lapse_rate(0.0, y, params.stability_factor);
  barrier_update(0.0, r0, true);
  record(0.0, 0);
  for (long s = 0; s < n; ++s) {
    const double t0 = static_cast<double>(s) * params.dt;
    const int m = std::max(1, static_cast<int>(std::ceil(params.dt / r0.step_cap - 1e-12)));
    ext.max_substeps = std::max(ext.max_substeps, m);
    const double h = params.dt / m;
    for (int sub = 0; sub < m; ++sub) {
      const double t = t0 + sub * h;
      // Classical RK4 with the first stage reused from the barrier evaluation.
      const detail::LapseState& k1 = r0.rate;
      detail::LapseState y2 = y;
      y2.axpy(0.5 * h, k1);
      const detail::LapseState k2 = rhs(t + 0.5 * h, y2);
      detail::LapseState y3 = y;
      y3.axpy(0.5 * h, k2);
      const detail::LapseState k3 = rhs(t + 0.5 * h, y3);
      detail::LapseState y4 = y;
      y4.axpy(h, k3);
      const detail::LapseState k4 = rhs(t + h, y4);
      y.axpy(h / 6.0, k1).axpy(h / 3.0, k2).axpy(h / 3.0, k3).axpy(h / 6.0, k4);
      if (!y.z.all_finite()) throw SolverError("extension: non-finite lapse at time " + std::to_string(t + h));
      const double t_next = sub + 1 == m ? static_cast<double>(s + 1) * params.dt : t + h;
      r0 = detail::lapse_rate(t_next, y, params.stability_factor);
      barrier_update(t_next, r0, false);
    }
    record(static_cast<double>(s + 1) * params.dt, s + 1);
  }
  return ext;
}

struct WInfinity {
  PeriodicField w_inf;
  double error_estimate = 0.0;  // size of the e^{-2t} extrapolation correction, sup norm
  std::optional<std::string> warning;
};

namespace detail {

/// q(t) = q_inf + A e^{-2t}: extrapolated limit from the last two samples,
/// the correction size, and a rate warning using a third sample.
inline WInfinity extrapolate_tail(const std::vector<double>& t, const std::vector<PeriodicField>& q) {
  const std::size_t n = t.size();
  if (n < 3) throw UsageError("extrapolation needs at least three tail samples");
  const PeriodicField d2 = q[n - 1] - q[n - 2];
  const double r = richardson_factor(t[n - 2], t[n - 1]);
  WInfinity out{q[n - 1] + PeriodicField(d2).map([r](double x) { return r * x; }), r * d2.max_abs(), {}};
  const double predicted = (std::exp(-2.0 * t[n - 2]) - std::exp(-2.0 * t[n - 1])) /
                           (std::exp(-2.0 * t[n - 3]) - std::exp(-2.0 * t[n - 2]));
  if (d2.max_abs() > 10.0 * predicted * sup_distance(q[n - 2], q[n - 3]) + 1e-14)
    out.warning = "tail differences shrink slower than e^{-2t}";
  return out;
}

}  // namespace detail

/// w_inf = lim e^{3s}(w - 1) as a function of theta on the Kottler cross
/// section. On the Eulerian leaves e^{3s}(w - 1) = e^{3(v - t)} z, so the
/// limit is extrapolated directly from the last snapshots.
inline WInfinity extract_w_infinity(const ExtensionTrajectory& ext) {
  if (ext.times.back() < 6.0 - 1e-12) throw UsageError("extract_w_infinity: extension must reach t >= 6");
  std::vector<double> t;
  std::vector<PeriodicField> q;
  for (std::size_t k = ext.size() >= 3 ? ext.size() - 3 : 0; k < ext.size(); ++k) {
    t.push_back(ext.times[k]);
    PeriodicField e3u = ext.u_snapshots[k].map([](double x) { return std::exp(3.0 * x); });
    q.push_back(e3u * ext.z_snapshots[k]);
  }
  return detail::extrapolate_tail(t, q);
}

/// Same limit through the Lagrangian labels: bold w_inf = lim z(t, Theta_t(x))
/// is extrapolated on labels and then pulled back by the limiting inverse map
/// and weighted by e^{3f}. Serves as an independent check of the Eulerian route.
inline WInfinity extract_w_infinity_lagrangian(const ExtensionTrajectory& ext, const FlowTrajectory& flow,
                                               const PeriodicField& f) {
  if (ext.times.back() < 6.0 - 1e-12) throw UsageError("extract_w_infinity: extension must reach t >= 6");
  std::vector<double> t;
  std::vector<PeriodicField> zl;
  const std::size_t first = ext.size() >= 3 ? ext.size() - 3 : 0;
  for (std::size_t k = first; k < ext.size(); ++k) {
    const std::size_t j = flow.index_near(ext.times[k]);
    if (std::abs(flow.times[j] - ext.times[k]) > 1e-9)
      throw UsageError("extract_w_infinity: flow and extension snapshot times differ");
    t.push_back(ext.times[k]);
    zl.push_back(compose(ext.z_snapshots[k], flow.theta(j)));
  }
  WInfinity bold = detail::extrapolate_tail(t, zl);
  const std::size_t jn = flow.index_near(ext.times.back());
  PeriodicField e3f = f.map([](double x) { return std::exp(3.0 * x); });
  return {e3f * compose(bold.w_inf, flow.inverse_snapshots[jn]), bold.error_estimate, bold.warning};
}

/// g+ sampled on uniformly spaced slices, in the chart (t, theta) in which the
/// leaves are the flow surfaces and theta is the Kottler angle. Components
/// are g_tt, g_t1, g_t2, g_11, g_12, g_22.
struct GPlusGrid {
  std::vector<double> times;
  std::vector<std::array<PeriodicField, 6>> slices;
};

namespace detail {

inline std::array<PeriodicField, 6> g_plus_slice(double t, const PeriodicField& u, const PeriodicField& z) {
  const Grid& g = u.grid();
  const SurfaceGeometry geom = surface_geometry({u + t});
  const NormalSpeed sp = normal_speed(u, geom.dv, t);
  const double e = std::exp(-3.0 * t);
  std::array<PeriodicField, 6> c{PeriodicField(g), PeriodicField(g), PeriodicField(g),
                                 PeriodicField(g), PeriodicField(g), PeriodicField(g)};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double w = 1.0 + e * z[k];
    const double a = sp.U.d1[k], b = sp.U.d2[k];
    const double g11 = geom.gamma.c11[k], g12 = geom.gamma.c12[k], g22 = geom.gamma.c22[k];
    const double l1 = g11 * a + g12 * b, l2 = g12 * a + g22 * b;  // lowered U
    c[0][k] = w * w + a * l1 + b * l2;
    c[1][k] = -l1;
    c[2][k] = -l2;
    c[3][k] = g11;
    c[4][k] = g12;
    c[5][k] = g22;
  }
  return c;
}

}  // namespace detail

/// Assembles g+ on the dense window of the extension. Writing the flow leaves
/// over the fixed theta grid turns w^2 dt^2 + gamma_t into
/// (w^2 + |U|^2) dt^2 - 2 U_i dt dtheta^i + gamma_ij dtheta^i dtheta^j.
inline GPlusGrid assemble_g_plus(const std::vector<double>& times, const std::vector<PeriodicField>& u,
                                 const std::vector<PeriodicField>& z) {
  if (times.size() != u.size() || times.size() != z.size()) throw UsageError("assemble_g_plus: mismatched slices");
  GPlusGrid out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    out.times.push_back(times[k]);
    out.slices.push_back(detail::g_plus_slice(times[k], u[k], z[k]));
  }
  return out;
}

inline GPlusGrid assemble_g_plus(const ExtensionTrajectory& ext) {
  if (ext.window_times.empty()) throw UsageError("assemble_g_plus: extension has no dense window");
  return assemble_g_plus(ext.window_times, ext.window_u, ext.window_z);
}

/// Scalar curvature of a 3-metric at a point from the metric, its first
/// derivatives dg[e][a][b] = d_e g_ab and second derivatives
/// ddg[e][f][a][b] = d_e d_f g_ab.
inline double scalar_curvature_3d(const double g[3][3], const double dg[3][3][3], const double ddg[3][3][3][3]) {
  double gi[3][3];
  {
    const double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                       g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                       g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    if (!(std::abs(det) > 0.0)) throw SolverError("scalar curvature: degenerate metric");
    gi[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
    gi[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
    gi[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
    gi[1][0] = gi[0][1];
    gi[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
    gi[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
    gi[2][0] = gi[0][2];
    gi[2][1] = gi[1][2];
    gi[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
  }
  double G[3][3][3];       // Gamma_{dab}
  double Gu[3][3][3];      // Gamma^c_{ab}
  double dG[3][3][3][3];   // d_e Gamma_{dab}
  double dgi[3][3][3];     // d_e g^{cd}
  for (int d = 0; d < 3; ++d)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        G[d][a][b] = 0.5 * (dg[a][d][b] + dg[b][d][a] - dg[d][a][b]);
        for (int e = 0; e < 3; ++e)
          dG[e][d][a][b] = 0.5 * (ddg[e][a][d][b] + ddg[e][b][d][a] - ddg[e][d][a][b]);
      }
  for (int c = 0; c < 3; ++c)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) s += gi[c][d] * G[d][a][b];
        Gu[c][a][b] = s;
      }
  for (int e = 0; e < 3; ++e)
    for (int c = 0; c < 3; ++c)
      for (int d = 0; d < 3; ++d) {
        double s = 0.0;
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) s -= gi[c][p] * gi[d][q] * dg[e][p][q];
        dgi[e][c][d] = s;
      }
  // d_e Gamma^c_ab
  auto dGu = [&](int e, int c, int a, int b) {
    double s = 0.0;
    for (int d = 0; d < 3; ++d) s += dgi[e][c][d] * G[d][a][b] + gi[c][d] * dG[e][d][a][b];
    return s;
  };
  double R = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double ric = 0.0;
      for (int c = 0; c < 3; ++c) {
        ric += dGu(c, c, a, b) - dGu(b, c, a, c);
        for (int d = 0; d < 3; ++d) ric += Gu[c][c][d] * Gu[d][a][b] - Gu[c][b][d] * Gu[d][a][c];
      }
      R += gi[a][b] * ric;
    }
  return R;
}

struct CurvatureResidual {
  double max_residual = 0.0;         // max |R + 6| over interior slices
  std::vector<double> slice_times;   // interior slice times
  std::vector<double> slice_residual;
};

/// |R(g+) + 6| with fourth-order central differences in t and spectral
/// derivatives in theta, on every slice with two neighbours on each side.
inline CurvatureResidual scalar_curvature_residual(const GPlusGrid& gp) {
  const std::size_t n = gp.times.size();
  if (n < 5) throw UsageError("scalar_curvature_residual: need at least 5 slices");
  const double h = gp.times[1] - gp.times[0];
  if (!(h > 0.0)) throw UsageError("scalar_curvature_residual: slice times must increase");
  for (std::size_t k = 1; k < n; ++k)
    if (std::abs(gp.times[k] - gp.times[k - 1] - h) > 1e-9 * h)
      throw UsageError("scalar_curvature_residual: slices must be uniformly spaced in t");

  const Grid& g = gp.slices.front()[0].grid();
  // Index pairs (a, b) of the six stored components, coordinate 0 is t.
  static constexpr int pa[6] = {0, 0, 0, 1, 1, 2};
  static constexpr int pb[6] = {0, 1, 2, 1, 2, 2};

  CurvatureResidual out;
  for (std::size_t k = 2; k + 2 < n; ++k) {
    std::vector<PeriodicField> dt, dtt;
    std::vector<CovectorField> dx, dtx;
    std::vector<SymTensorField> dxx;
    for (int c = 0; c < 6; ++c) {
      const PeriodicField& fm2 = gp.slices[k - 2][c];
      const PeriodicField& fm1 = gp.slices[k - 1][c];
      const PeriodicField& f0 = gp.slices[k][c];
      const PeriodicField& fp1 = gp.slices[k + 1][c];
      const PeriodicField& fp2 = gp.slices[k + 2][c];
      PeriodicField d1(g), d2(g);
      for (std::size_t p = 0; p < g.size(); ++p) {
        d1[p] = (fm2[p] - 8.0 * fm1[p] + 8.0 * fp1[p] - fp2[p]) / (12.0 * h);
        d2[p] = (-fm2[p] + 16.0 * fm1[p] - 30.0 * f0[p] + 16.0 * fp1[p] - fp2[p]) / (12.0 * h * h);
      }
      dx.push_back(spectral_gradient(f0));
      dxx.push_back(spectral_hessian(f0));
      dtx.push_back(spectral_gradient(d1));
      dt.push_back(std::move(d1));
      dtt.push_back(std::move(d2));
    }
    double worst = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      double gm[3][3], dg[3][3][3], ddg[3][3][3][3];
      for (int c = 0; c < 6; ++c) {
        const int a = pa[c], b = pb[c];
        auto put2 = [&](double (&m)[3][3], double val) {
          m[a][b] = val;
          m[b][a] = val;
        };
        put2(gm, gp.slices[k][c][p]);
        put2(dg[0], dt[c][p]);
        put2(dg[1], dx[c].d1[p]);
        put2(dg[2], dx[c].d2[p]);
        const double dd[3][3] = {{dtt[c][p], dtx[c].d1[p], dtx[c].d2[p]},
                                 {dtx[c].d1[p], dxx[c].c11[p], dxx[c].c12[p]},
                                 {dtx[c].d2[p], dxx[c].c12[p], dxx[c].c22[p]}};
        for (int e = 0; e < 3; ++e)
          for (int f = 0; f < 3; ++f) put2(ddg[e][f], dd[e][f]);
      }
      worst = std::max(worst, std::abs(scalar_curvature_3d(gm, dg, ddg) + 6.0));
    }
    out.slice_times.push_back(gp.times[k]);
    out.slice_residual.push_back(worst);
    out.max_residual = std::max(out.max_residual, worst);
  }
  return out;
}

}  // namespace kml

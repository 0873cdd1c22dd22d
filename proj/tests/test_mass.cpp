#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <functional>
#include <utility>

#include "kml/hm_geon.hpp"
#include "kml/mass.hpp"
#include "kml/normal_flow.hpp"

namespace kml {
namespace {

const FlatTorus kSigma{1.0, 0.2, 1.5};

double sigma_area() { return kTwoPi * kTwoPi * std::sqrt(1.5 - 0.04); }

FlowParams flow_params(double t_max, double dt, int stride) {
  FlowParams p;
  p.t_max = t_max;
  p.dt = dt;
  p.snapshot_stride = stride;
  return p;
}

ExtensionParams ext_params(double dt, int stride) {
  ExtensionParams p;
  p.dt = dt;
  p.snapshot_stride = stride;
  return p;
}

double closed_form_w(double w0, double t) { return 1.0 / std::sqrt(1.0 + (1.0 / (w0 * w0) - 1.0) * std::exp(-3.0 * t)); }

PeriodicField divide(const PeriodicField& a, const PeriodicField& b) {
  PeriodicField out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] /= b[k];
  return out;
}

struct FlatRun {
  double c, w0;
  FlowTrajectory flow;
  ExtensionTrajectory ext;
};

const FlatRun& flat_run() {
  static const FlatRun run = [] {
    const double c = 0.3, w0 = 2.0;
    auto flow = run_flow({PeriodicField(Grid(8, 8, kSigma), c)}, flow_params(8.0, 1e-3, 500));
    auto ext = solve_w(flow, PeriodicField(flow.grid(), w0), ext_params(1e-3, 500));
    return FlatRun{c, w0, std::move(flow), std::move(ext)};
  }();
  return run;
}

struct GenericRun {
  SurfaceGeometry geom;
  PeriodicField H_phys, w0;
  FlowTrajectory flow;
  ExtensionTrajectory ext;
};

const GenericRun& generic_run() {
  static const GenericRun run = [] {
    const Grid grid(32, 32, kSigma);
    GraphSurface s{PeriodicField::sample(grid, [](double x, double y) { return 0.2 * std::sin(x) + 0.1 * std::cos(y); })};
    auto geom = surface_geometry(s);
    auto H_phys = divide(geom.H, PeriodicField::sample(grid, [](double x, double y) { return 1.2 + 0.1 * std::sin(x + y); }));
    auto w0 = divide(geom.H, H_phys);
    auto flow = run_flow(s, flow_params(8.0, 4e-3, 125));
    auto ext = solve_w(flow, w0, ext_params(4e-3, 125));
    return GenericRun{std::move(geom), std::move(H_phys), std::move(w0), std::move(flow), std::move(ext)};
  }();
  return run;
}

TEST(StaticBrownYork, VanishesForMatchingMeanCurvature) {
  const auto geom = surface_geometry(
      {PeriodicField::sample(Grid(16, 16, kSigma), [](double x, double y) { return 0.1 * std::sin(x) * std::cos(y); })});
  EXPECT_LE(std::abs(static_brown_york(geom, geom.H)), 1e-13);
}

TEST(StaticBrownYork, FlatClosedFormAndLinearity) {
  const double c = 0.4;
  const auto geom = surface_geometry({PeriodicField(Grid(8, 8, kSigma), c)});
  for (double w0 : {0.5, 1.5, 3.0}) {
    const double expected = std::exp(3.0 * c) * (1.0 - 1.0 / w0) * sigma_area() / (4.0 * kPi);
    EXPECT_NEAR(static_brown_york(geom, PeriodicField(geom.grid(), 2.0 / w0)), expected, 1e-12);
  }
  // Affine in H_phys: m(H0 - d) = m(H0) + (1/8 pi) int V d dA.
  const PeriodicField d = PeriodicField::sample(geom.grid(), [](double x, double) { return 0.3 + 0.1 * std::cos(x); });
  const double shift = integrate_area(geom.V * d * geom.area_density) / (8.0 * kPi);
  EXPECT_NEAR(static_brown_york(geom, geom.H - d), shift, 1e-12);
}

TEST(StaticBrownYork, RejectsNonpositivePhysicalMeanCurvature) {
  const auto geom = surface_geometry({PeriodicField(Grid(8, 8), 0.0)});
  EXPECT_THROW(static_brown_york(geom, PeriodicField(geom.grid(), 0.0)), HypothesisError);
}

TEST(QuasilocalSeries, UnitLapseGivesZero) {
  const auto flow = run_flow({PeriodicField::sample(Grid(16, 16), [](double x, double) { return 0.1 * std::sin(x); })},
                             flow_params(2.0, 0.01, 50));
  const auto ext = solve_w(flow, PeriodicField(flow.grid(), 1.0), ext_params(0.01, 50));
  for (const auto& p : quasilocal_series(ext)) EXPECT_EQ(p.m, 0.0);
}

TEST(QuasilocalSeries, FlatClosedForm) {
  const auto& r = flat_run();
  const auto series = quasilocal_series(r.ext);
  ASSERT_EQ(series.size(), r.ext.size());
  for (const auto& p : series) {
    // e^{3t}(w - 1) = -C / (sqrt(1 + x)(1 + sqrt(1 + x))), x = C e^{-3t}, without cancellation.
    const double C = 1.0 / (r.w0 * r.w0) - 1.0, q = std::sqrt(1.0 + C * std::exp(-3.0 * p.t));
    const double z = -C / (q * (1.0 + q)), w = closed_form_w(r.w0, p.t);
    const double expected = std::exp(3.0 * r.c) * 2.0 * (z / w) * sigma_area() / (8.0 * kPi);
    EXPECT_NEAR(p.m, expected, 1e-8 * std::max(1.0, std::abs(expected))) << "t = " << p.t;
  }
  EXPECT_EQ(monotonicity_violation(series), 0.0);
}

TEST(QuasilocalSeries, MonotonicityViolationMeasuresIncreases) {
  EXPECT_EQ(monotonicity_violation({{0, 3}, {1, 2}, {2, 2}}), 0.0);
  EXPECT_DOUBLE_EQ(monotonicity_violation({{0, 3}, {1, 2}, {2, 2.5}, {3, 2.1}}), 0.5);
}

TEST(TotalMass, FlatClosedForm) {
  const auto& r = flat_run();
  const WInfinity wi = extract_w_infinity(r.ext);
  const double expected = std::exp(3.0 * r.c) * (1.0 - 1.0 / (r.w0 * r.w0)) * sigma_area() / (8.0 * kPi);
  EXPECT_NEAR(total_mass_from_w_infinity(wi), expected, 1e-8);
  EXPECT_NEAR(quasilocal_series(r.ext).back().m, expected, 1e-8);
}

std::vector<RadialMetricSample> samples_from(const std::vector<double>& radii,
                                             const std::function<SymTensorField(double)>& g) {
  std::vector<RadialMetricSample> out;
  for (double r : radii) out.push_back({r, g(r)});
  return out;
}

SymTensorField scaled_sigma(const Grid& grid, double a, const PeriodicField& b) {
  const FlatTorus& s = grid.torus();
  SymTensorField g{PeriodicField(grid), PeriodicField(grid), PeriodicField(grid)};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double f = a + b[k];
    g.c11[k] = f * s.s11();
    g.c12[k] = f * s.s12();
    g.c22[k] = f * s.s22();
  }
  return g;
}

TEST(MassAspect, KottlerHasZeroMass) {
  const Grid grid(8, 8, kSigma);
  const auto samples = samples_from({4.0, 5.0, 6.0},
                                    [&](double r) { return scaled_sigma(grid, std::exp(2.0 * r), PeriodicField(grid)); });
  const MassAspect ma = mass_aspect_from_expansion(samples);
  // Rounding in e^{2r} is amplified by e^{3r} in the fitted coefficient.
  EXPECT_LE(std::abs(ma.mass), 1e-9);
  EXPECT_LE(ma.trace.max_abs(), 1e-8);
}

TEST(MassAspect, PlantedCoefficient) {
  const Grid grid(16, 16, kSigma);
  const PeriodicField wbar = PeriodicField::sample(grid, [](double x, double y) { return 0.7 + 0.2 * std::sin(x - y); });
  const auto samples = samples_from({3.0, 3.5, 4.0, 4.5}, [&](double r) {
    return scaled_sigma(grid, std::exp(2.0 * r), wbar.map([r](double x) { return (2.0 / 3.0) * x * std::exp(-r); }));
  });
  const MassAspect ma = mass_aspect_from_expansion(samples);
  EXPECT_NEAR(ma.mass, integrate_area(wbar) / (4.0 * kPi), 1e-9);
  EXPECT_LE(ma.max_residual, 1e-12);
  EXPECT_LE(sup_distance(ma.trace, wbar.map([](double x) { return 4.0 * x; })), 1e-8);
}

// Flat extension: g+ = w(s)^2 ds^2 + e^{2s} sigma. In the arclength coordinate
// r = s - int_s^inf (w - 1) the tangential metric is e^{2 s(r)} sigma.
TEST(MassAspect, FlatExtensionMatchesTotalMass) {
  const auto& run = flat_run();
  const double C = 1.0 / (run.w0 * run.w0) - 1.0;
  auto w = [&](double s) { return 1.0 / std::sqrt(1.0 + C * std::exp(-3.0 * (s - run.c))); };
  boost::math::quadrature::exp_sinh<double> tail;
  auto r_of_s = [&](double s) { return s - tail.integrate([&](double x) { return w(s + x) - 1.0; }); };
  auto s_of_r = [&](double r) {
    double s = r;
    for (int it = 0; it < 50; ++it) {
      const double step = (r_of_s(s) - r) / w(s);
      s -= step;
      if (std::abs(step) < 1e-15) break;
    }
    return s;
  };
  const Grid& grid = run.flow.grid();
  const auto samples = samples_from({4.0, 4.5, 5.0, 5.5, 6.0}, [&](double r) {
    return scaled_sigma(grid, std::exp(2.0 * s_of_r(r)), PeriodicField(grid));
  });
  const MassAspect ma = mass_aspect_from_expansion(samples);
  const double m_total = total_mass_from_w_infinity(extract_w_infinity(run.ext));
  EXPECT_NEAR(ma.mass, m_total, 1e-4 * std::abs(m_total));
}

TEST(MassAspect, RejectsIllConditionedOrShortInput) {
  const Grid grid(8, 8);
  auto g = [&](double r) { return scaled_sigma(grid, std::exp(2.0 * r), PeriodicField(grid)); };
  EXPECT_THROW(mass_aspect_from_expansion(samples_from({5.0, 5.0 + 1e-10, 5.0 + 2e-10}, g)), SolverError);
  EXPECT_THROW(mass_aspect_from_expansion(samples_from({5.0, 6.0}, g)), UsageError);
}

TEST(Inequality, UnitLapseHasZeroGap) {
  const auto geom = surface_geometry({PeriodicField::sample(Grid(16, 16), [](double x, double) { return 0.1 * std::sin(x); })});
  const auto rep = shi_tam_inequality_report(geom, geom.H, PeriodicField(geom.grid(), 1.0), 0.0);
  EXPECT_LE(std::abs(rep.gap), 1e-14);
}

TEST(Inequality, FlatGapClosedForm) {
  const auto& r = flat_run();
  const auto geom = surface_geometry(r.flow.initial);
  const PeriodicField w0(geom.grid(), r.w0);
  const auto rep = shi_tam_inequality_report(geom, divide(geom.H, w0), w0,
                                             total_mass_from_w_infinity(extract_w_infinity(r.ext)));
  const double a = 1.0 - 1.0 / r.w0;
  EXPECT_NEAR(rep.gap, std::exp(3.0 * r.c) * sigma_area() * a * a / (8.0 * kPi), 1e-8);
}

TEST(Inequality, GenericGapNonnegativeAndSeriesConsistent) {
  const auto& r = generic_run();
  const WInfinity wi = extract_w_infinity(r.ext);
  const double m_total = total_mass_from_w_infinity(wi);
  const auto rep = shi_tam_inequality_report(r.geom, r.H_phys, r.w0, m_total);
  EXPECT_GE(rep.gap, -1e-6);
  const auto series = quasilocal_series(r.ext);
  EXPECT_NEAR(series.front().m, rep.lhs, 1e-12);
  EXPECT_LE(monotonicity_violation(series), 1e-10);
  const double est = wi.error_estimate * sigma_area() / (4.0 * kPi);
  EXPECT_LE(std::abs(series.back().m - m_total), 5.0 * est);
}

TEST(Inequality, RejectsInconsistentLapse) {
  const auto geom = surface_geometry({PeriodicField(Grid(8, 8), 0.0)});
  EXPECT_THROW(shi_tam_inequality_report(geom, geom.H, PeriodicField(geom.grid(), 1.5), 0.0), UsageError);
}

TEST(Penrose, Bound) {
  EXPECT_DOUBLE_EQ(penrose_bound(4.0, 16.0 * kPi), 4.0);
  EXPECT_EQ(penrose_bound(0.0, 3.0), 0.0);
  EXPECT_THROW(penrose_bound(-1.0, 3.0), UsageError);
  EXPECT_THROW(penrose_bound(1.0, 0.0), UsageError);
}

// The geon's outer boundary, placed as a level set of the Kottler manifold,
// reproduces the closed-form mass through the generic functional.
TEST(StaticBrownYork, GeonBoundaryCrossCheck) {
  for (double r0 : {1.5, 4.0, 20.0}) {
    GeonConfig cfg;
    cfg.r_0 = r0;
    const Grid grid(8, 8, geon_reference_torus(cfg));
    const auto geom = surface_geometry({PeriodicField(grid, std::log(r0))});
    const double m = static_brown_york(geom, PeriodicField(grid, geon_mean_curvature(r0)));
    EXPECT_NEAR(m, geon_static_mass(cfg).m_exact, 1e-10) << "r0 = " << r0;
  }
}

}  // namespace
}  // namespace kml

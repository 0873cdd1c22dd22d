#include <gtest/gtest.h>

#include <cmath>

#include "kml/periodic_map.hpp"
#include "kml/torus_grid.hpp"
#include "oracles.hpp"

namespace kml {
namespace {

double max_err(const PeriodicField& f, auto&& exact) {
  const Grid& g = f.grid();
  double m = 0;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j)
      m = std::max(m, std::abs(f(i, j) - exact(g.theta1(i), g.theta2(j))));
  return m;
}

TEST(FlatTorus, RejectsIndefiniteMetric) {
  EXPECT_THROW(FlatTorus(1.0, 2.0, 1.0), UsageError);
  EXPECT_THROW(FlatTorus(-1.0, 0.0, 1.0), UsageError);
  EXPECT_NO_THROW(FlatTorus(1.0, 0.5, 2.0));
}

TEST(FlatTorus, AreaAndInverse) {
  const FlatTorus t(1.0, 0.25, 2.0);
  EXPECT_NEAR(t.area(), kTwoPi * kTwoPi * std::sqrt(2.0 - 0.0625), 1e-12);
  const auto inv = t.inverse();
  EXPECT_NEAR(1.0 * inv[0] + 0.25 * inv[1], 1.0, 1e-15);
  EXPECT_NEAR(0.25 * inv[0] + 2.0 * inv[1], 0.0, 1e-15);
}

TEST(Grid, RejectsOddSizes) {
  EXPECT_THROW(Grid(15, 16), UsageError);
  EXPECT_THROW(Grid(16, 7), UsageError);
  EXPECT_THROW(Grid(0, 16), UsageError);
}

TEST(SpectralGradient, ConstantHasZeroGradient) {
  const Grid g(32, 16);
  const auto d = spectral_gradient(PeriodicField(g, 3.7));
  EXPECT_LE(d.d1.max_abs(), 1e-13);
  EXPECT_LE(d.d2.max_abs(), 1e-13);
}

TEST(SpectralGradient, SingleModeExact) {
  for (int n : {4, 8, 16}) {
    const Grid g(n, n);
    const auto f = PeriodicField::sample(g, [](double x, double) { return std::sin(x); });
    const auto d = spectral_gradient(f);
    EXPECT_LE(max_err(d.d1, [](double x, double) { return std::cos(x); }), 1e-14) << n;
    EXPECT_LE(d.d2.max_abs(), 1e-14);
  }
}

TEST(SpectralGradient, ProductModeMatchesAnalytic) {
  const Grid g(16, 16);
  const auto f = PeriodicField::sample(g, [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y); });
  const auto d = spectral_gradient(f);
  EXPECT_LE(max_err(d.d1, [](double x, double y) { return 3 * std::cos(3 * x) * std::cos(2 * y); }), 1e-12);
  EXPECT_LE(max_err(d.d2, [](double x, double y) { return -2 * std::sin(3 * x) * std::sin(2 * y); }), 1e-12);
}

TEST(SpectralHessian, ConstantAndSingleMode) {
  const Grid g(16, 16);
  const auto hc = spectral_hessian(PeriodicField(g, -2.5));
  EXPECT_LE(hc.c11.max_abs() + hc.c12.max_abs() + hc.c22.max_abs(), 1e-13);

  const auto f = PeriodicField::sample(g, [](double, double y) { return std::cos(y); });
  const auto h = spectral_hessian(f);
  EXPECT_LE(max_err(h.c22, [](double, double y) { return -std::cos(y); }), 1e-13);
  EXPECT_LE(h.c11.max_abs(), 1e-13);
  EXPECT_LE(h.c12.max_abs(), 1e-13);
}

TEST(SpectralHessian, ProductModeMatchesAnalytic) {
  const Grid g(16, 16);
  const auto f = PeriodicField::sample(g, [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y); });
  const auto h = spectral_hessian(f);
  EXPECT_LE(max_err(h.c11, [](double x, double y) { return -9 * std::sin(3 * x) * std::cos(2 * y); }), 1e-11);
  EXPECT_LE(max_err(h.c12, [](double x, double y) { return -6 * std::cos(3 * x) * std::sin(2 * y); }), 1e-11);
  EXPECT_LE(max_err(h.c22, [](double x, double y) { return -4 * std::sin(3 * x) * std::cos(2 * y); }), 1e-11);
}

TEST(SpectralGradient, AgreesUnderRefinementOnBandLimitedFields) {
  const auto p = oracle::TrigPoly::random(7, 5, 0.3);
  const Grid coarse(16, 16), fine(32, 32);
  const auto dc = spectral_gradient(PeriodicField::sample(coarse, p));
  const auto df = spectral_gradient(PeriodicField::sample(fine, p));
  const auto hc = spectral_hessian(PeriodicField::sample(coarse, p));
  const auto hf = spectral_hessian(PeriodicField::sample(fine, p));
  double m = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      m = std::max(m, std::abs(dc.d1(i, j) - df.d1(2 * i, 2 * j)));
      m = std::max(m, std::abs(dc.d2(i, j) - df.d2(2 * i, 2 * j)));
      m = std::max(m, std::abs(hc.c12(i, j) - hf.c12(2 * i, 2 * j)));
    }
  EXPECT_LE(m, 1e-12);
  EXPECT_LE(max_err(dc.d1, [&](double x, double y) { return p.d1(x, y); }), 1e-12);
}

TEST(Integrate, ClosedForms) {
  const Grid g(16, 16);
  EXPECT_NEAR(integrate(PeriodicField(g, 1.0)), kTwoPi * kTwoPi, 1e-12);
  EXPECT_NEAR(integrate(PeriodicField::sample(g, [](double x, double) { return std::sin(x); })), 0.0, 1e-13);
  const auto f = PeriodicField::sample(g, [](double x, double y) { return 2 + std::cos(4 * x) * std::cos(4 * y); });
  EXPECT_NEAR(integrate(f), 2 * kTwoPi * kTwoPi, 1e-12);
}

TEST(Integrate, DerivativesIntegrateToZero) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const Grid g(24, 32);
    const auto p = oracle::TrigPoly::random(seed, 6, 1.0);
    // Non-polynomial periodic density built from the random polynomial.
    const auto f = PeriodicField::sample(g, [&](double x, double y) { return std::exp(0.3 * p(x, y)); });
    const auto d = spectral_gradient(f);
    EXPECT_LE(std::abs(integrate(d.d1)), 1e-12) << seed;
    EXPECT_LE(std::abs(integrate(d.d2)), 1e-12) << seed;
  }
}

TEST(TrigInterpolant, ReproducesSamplesAndBandLimitedValues) {
  const Grid g(16, 12);
  const auto p = oracle::TrigPoly::random(3, 4, 0.5);
  // Include a Nyquist cosine along both axes.
  auto f = [&](double x, double y) { return p(x, y) + 0.3 * std::cos(8 * x) + 0.2 * std::cos(6 * y); };
  const auto field = PeriodicField::sample(g, f);
  const TrigInterpolant interp(field);
  for (int i = 0; i < g.n1(); i += 3)
    for (int j = 0; j < g.n2(); j += 2) EXPECT_NEAR(interp(g.theta1(i), g.theta2(j)), field(i, j), 1e-13);
  for (double x : {0.1, 1.3, 4.4})
    for (double y : {0.7, 2.9, 6.0}) EXPECT_NEAR(interp(x, y), f(x, y), 1e-12);
}

TEST(PeriodicMap, InversionSatisfiesMapEquation) {
  const Grid g(32, 32);
  const auto p1 = oracle::TrigPoly::random(11, 3, 0.02);
  const auto p2 = oracle::TrigPoly::random(12, 3, 0.02);
  const Displacement map{PeriodicField::sample(g, p1), PeriodicField::sample(g, p2)};
  const Displacement inv = invert(map);
  // x = y + e(y) must satisfy x + d(x) = y, checked with the exact polynomials.
  double m = 0;
  for (int i = 0; i < g.n1(); ++i)
    for (int j = 0; j < g.n2(); ++j) {
      const double x1 = g.theta1(i) + inv.d1(i, j), x2 = g.theta2(j) + inv.d2(i, j);
      m = std::max(m, std::abs(x1 + p1(x1, x2) - g.theta1(i)));
      m = std::max(m, std::abs(x2 + p2(x1, x2) - g.theta2(j)));
    }
  EXPECT_LE(m, 1e-12);
}

TEST(PeriodicMap, DoubleInversionConvergesUnderRefinement) {
  // The inverse displacement is not band-limited, so inverting it again is
  // only as good as its interpolant; the round trip error must fall fast.
  const auto p1 = oracle::TrigPoly::random(11, 3, 0.02);
  const auto p2 = oracle::TrigPoly::random(12, 3, 0.02);
  auto round_trip = [&](int n) {
    const Grid g(n, n);
    const Displacement map{PeriodicField::sample(g, p1), PeriodicField::sample(g, p2)};
    const Displacement twice = invert(invert(map));
    return std::max(sup_distance(twice.d1, map.d1), sup_distance(twice.d2, map.d2));
  };
  const double e32 = round_trip(32), e64 = round_trip(64), e128 = round_trip(128);
  EXPECT_LT(e64, e32 / 10) << e32 << " " << e64;
  EXPECT_LT(e128, e64 / 100) << e64 << " " << e128;
}

TEST(PeriodicMap, JacobianOfIdentityIsOne) {
  const Grid g(16, 16);
  const auto det = jacobian_determinant(Displacement::identity(g));
  EXPECT_DOUBLE_EQ(det.min(), 1.0);
  EXPECT_DOUBLE_EQ(det.max(), 1.0);
}

}  // namespace
}  // namespace kml

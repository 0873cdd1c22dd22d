#pragma once

// Radially symmetric solutions of Delta u = 3 |grad u| on warped products
// ds^2 + e^{2A(s)} sigma. On the increasing branch u' > 0 the equation is
// linear, u'' + 2 A' u' = 3 u', and is solved by an integrating factor.

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kml/error.hpp"

namespace kml {

struct Warp {
  std::function<double(double)> A;
  std::function<double(double)> dA;  // A'
  std::string name;

  static Warp kottler() {
    return {[](double s) { return s; }, [](double) { return 1.0; }, "kottler"};
  }
  /// A' = 3/2: the integrating factor is constant and u is linear.
  static Warp linear() {
    return {[](double s) { return 1.5 * s; }, [](double) { return 1.5; }, "linear"};
  }
  /// A = s + eps sin s.
  static Warp perturbed(double eps) {
    return {[eps](double s) { return s + eps * std::sin(s); }, [eps](double s) { return 1.0 + eps * std::cos(s); },
            "perturbed"};
  }
};

struct RadialBoundaryData {
  double u0 = 1.0;      // u(s0)
  double slope1 = 1.0;  // u'(s1)
};

struct RadialSolution {
  std::vector<double> s;
  std::vector<double> u;
  std::vector<double> du;   // u'
  std::vector<double> A;
  std::vector<double> dA;
};

/// u'(s) = u'(s1) exp(3(s - s1) - 2(A(s) - A(s1))), and u = u0 + int_{s0}^s u'
/// by Gauss-Legendre quadrature on each grid interval.
inline RadialSolution solve_radial(const Warp& warp, double s0, double s1, int intervals,
                                   const RadialBoundaryData& bc) {
  if (!(s1 > s0) || intervals < 1) throw UsageError("radial: need s1 > s0 and at least one interval");
  const double A1 = warp.A(s1);
  auto slope = [&](double s) { return bc.slope1 * std::exp(3.0 * (s - s1) - 2.0 * (warp.A(s) - A1)); };
  RadialSolution sol;
  const double h = (s1 - s0) / intervals;
  double u = bc.u0;
  for (int k = 0; k <= intervals; ++k) {
    const double s = k == intervals ? s1 : s0 + k * h;
    if (k > 0) u += boost::math::quadrature::gauss<double, 10>::integrate(slope, sol.s.back(), s);
    const double du = slope(s);
    if (!(du > 0.0))
      throw SolverError("radial: u' <= 0 at s = " + std::to_string(s) +
                        "; the increasing branch breaks down (non-radial solving is not supported)");
    sol.s.push_back(s);
    sol.u.push_back(u);
    sol.du.push_back(du);
    sol.A.push_back(warp.A(s));
    sol.dA.push_back(warp.dA(s));
  }
  return sol;
}

/// 4 min d_nu u over the inner boundary, with the inner normal +d_s.
inline double penrose_constant(const RadialSolution& sol) {
  if (sol.du.empty() || !(sol.du.front() > 0.0))
    throw SolverError("penrose constant: u'(s0) must be positive");
  return 4.0 * sol.du.front();
}

/// |Hess u - |grad u| g|^2 / |grad u| along s. On the warped product
/// Hess u = u'' ds^2 + A' u' e^{2A} sigma, so the integrand is
/// ((u'' - u')^2 + 2 (A' u' - u')^2) / u'. The multiple of g is fixed so
/// that the trace of the bracket is Delta u - 3 |grad u|; it vanishes
/// identically on the Kottler warp with u = e^s.
inline std::vector<double> mass_integrand_diagnostic(const RadialSolution& sol) {
  std::vector<double> out;
  for (std::size_t k = 0; k < sol.s.size(); ++k) {
    const double up = sol.du[k];
    const double upp = (3.0 - 2.0 * sol.dA[k]) * up;
    const double a = upp - up, b = sol.dA[k] * up - up;
    out.push_back((a * a + 2.0 * b * b) / up);
  }
  return out;
}

}  // namespace kml

#pragma once

// Geometry of a graphical torus {s = v(theta)} in the Kottler manifold
// (R x T^2, ds^2 + e^{2s} sigma) with static potential V = e^s. The unit
// normal points toward increasing s.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kml/error.hpp"
#include "kml/mat2.hpp"
#include "kml/torus_grid.hpp"

namespace kml {

/// Graph height v over the s = 0 level set.
struct GraphSurface {
  PeriodicField v;

  const Grid& grid() const { return v.grid(); }
  const FlatTorus& torus() const { return v.grid().torus(); }
};

struct SurfaceGeometry {
  CovectorField dv;           // v_i
  SymTensorField gamma;       // induced metric
  SymTensorField gamma_inv;   // its inverse
  SymTensorField h;           // second fundamental form
  SymTensorField flux_metric; // rho e^{2v} gamma^{ij}: densitized inverse metric (per sqrt det sigma)
  PeriodicField rho;          // sqrt(1 + e^{-2v} |grad v|^2_sigma)
  PeriodicField H;            // gamma^{ij} h_ij
  PeriodicField K;            // Gauss curvature of gamma, computed intrinsically
  PeriodicField area_density; // dA_gamma / dA_sigma = rho e^{2v}
  PeriodicField V;            // e^v

  const Grid& grid() const { return H.grid(); }

  /// Mixed shape operator gamma^{-1} h at storage index k.
  Mat2 shape_operator(std::size_t k) const {
    const double g11 = gamma_inv.c11[k], g12 = gamma_inv.c12[k], g22 = gamma_inv.c22[k];
    const double h11 = h.c11[k], h12 = h.c12[k], h22 = h.c22[k];
    return {g11 * h11 + g12 * h12, g11 * h12 + g12 * h22, g12 * h11 + g22 * h12,
            g12 * h12 + g22 * h22};
  }

  /// |h|^2_gamma = tr(S^2).
  PeriodicField h_norm_squared() const {
    PeriodicField out(grid());
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Mat2 s = shape_operator(k);
      out[k] = (s * s).trace();
    }
    return out;
  }

  /// |h - gamma|_gamma = |S - I|.
  PeriodicField umbilic_deviation() const {
    PeriodicField out(grid());
    for (std::size_t k = 0; k < out.size(); ++k) {
      const Mat2 b = shape_operator(k) - Mat2::identity();
      out[k] = std::sqrt(std::max(0.0, (b * b).trace()));
    }
    return out;
  }

  /// H^2 - |h|^2_gamma - 2K - 2, which vanishes by the Gauss equation.
  PeriodicField gauss_residual() const {
    PeriodicField out = h_norm_squared();
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = H[k] * H[k] - out[k] - 2.0 * K[k] - 2.0;
    return out;
  }
};

namespace detail {

inline double det3(const double m[3][3]) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

/// Gauss curvature of E du^2 + 2F du dv + G dv^2 by the Brioschi formula.
inline PeriodicField brioschi_curvature(const PeriodicField& E, const PeriodicField& F,
                                        const PeriodicField& G) {
  const Spectrum sE = forward_transform(E), sF = forward_transform(F),
                 sG = forward_transform(G);
  const PeriodicField Eu = derivative(sE, 1, 0), Ev = derivative(sE, 0, 1),
                      Evv = derivative(sE, 0, 2);
  const PeriodicField Fu = derivative(sF, 1, 0), Fv = derivative(sF, 0, 1),
                      Fuv = derivative(sF, 1, 1);
  const PeriodicField Gu = derivative(sG, 1, 0), Gv = derivative(sG, 0, 1),
                      Guu = derivative(sG, 2, 0);
  PeriodicField K(E.grid());
  for (std::size_t k = 0; k < K.size(); ++k) {
    const double e = E[k], f = F[k], g = G[k];
    const double m1[3][3] = {{-0.5 * Evv[k] + Fuv[k] - 0.5 * Guu[k], 0.5 * Eu[k], Fu[k] - 0.5 * Ev[k]},
                             {Fv[k] - 0.5 * Gu[k], e, f},
                             {0.5 * Gv[k], f, g}};
    const double m2[3][3] = {{0.0, 0.5 * Ev[k], 0.5 * Gu[k]}, {0.5 * Ev[k], e, f}, {0.5 * Gu[k], f, g}};
    const double w = e * g - f * f;
    K[k] = (det3(m1) - det3(m2)) / (w * w);
  }
  return K;
}

}  // namespace detail

/// All extrinsic and intrinsic quantities of the graph. Throws SolverError if
/// the induced metric fails to be positive definite at a grid point.
inline SurfaceGeometry surface_geometry(const GraphSurface& surface) {
  const PeriodicField& v = surface.v;
  const Grid& grid = v.grid();
  const FlatTorus& sigma = grid.torus();
  const auto [i11, i12, i22] = sigma.inverse();

  const Spectrum sv = forward_transform(v);
  CovectorField dv{derivative(sv, 1, 0), derivative(sv, 0, 1)};
  const SymTensorField hess{derivative(sv, 2, 0), derivative(sv, 1, 1), derivative(sv, 0, 2)};

  SurfaceGeometry out{dv,
                      {PeriodicField(grid), PeriodicField(grid), PeriodicField(grid)},
                      {PeriodicField(grid), PeriodicField(grid), PeriodicField(grid)},
                      {PeriodicField(grid), PeriodicField(grid), PeriodicField(grid)},
                      {PeriodicField(grid), PeriodicField(grid), PeriodicField(grid)},
                      PeriodicField(grid),
                      PeriodicField(grid),
                      PeriodicField(grid),
                      PeriodicField(grid),
                      PeriodicField(grid)};

  for (int i = 0; i < grid.n1(); ++i) {
    for (int j = 0; j < grid.n2(); ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * grid.n2() + j;
      const double v1 = dv.d1[k], v2 = dv.d2[k];
      const double u1 = i11 * v1 + i12 * v2, u2 = i12 * v1 + i22 * v2;  // v^i
      const double e2v = std::exp(2.0 * v[k]);
      const double em2v = 1.0 / e2v;
      const double q = em2v * (v1 * u1 + v2 * u2);
      const double rho2 = 1.0 + q;
      const double rho = std::sqrt(rho2);

      const double g11 = e2v * sigma.s11() + v1 * v1;
      const double g12 = e2v * sigma.s12() + v1 * v2;
      const double g22 = e2v * sigma.s22() + v2 * v2;
      if (!(g11 > 0.0 && g11 * g22 - g12 * g12 > 0.0) || !std::isfinite(g11 * g22))
        throw SolverError("induced metric is not positive definite at grid point (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");

      const double c = em2v * em2v / rho2;
      out.gamma.c11[k] = g11;
      out.gamma.c12[k] = g12;
      out.gamma.c22[k] = g22;
      out.gamma_inv.c11[k] = em2v * i11 - c * u1 * u1;
      out.gamma_inv.c12[k] = em2v * i12 - c * u1 * u2;
      out.gamma_inv.c22[k] = em2v * i22 - c * u2 * u2;

      const double ca = em2v / rho2;
      out.flux_metric.c11[k] = rho * (i11 - ca * u1 * u1);
      out.flux_metric.c12[k] = rho * (i12 - ca * u1 * u2);
      out.flux_metric.c22[k] = rho * (i22 - ca * u2 * u2);

      out.h.c11[k] = (-hess.c11[k] + 2.0 * v1 * v1 + e2v * sigma.s11()) / rho;
      out.h.c12[k] = (-hess.c12[k] + 2.0 * v1 * v2 + e2v * sigma.s12()) / rho;
      out.h.c22[k] = (-hess.c22[k] + 2.0 * v2 * v2 + e2v * sigma.s22()) / rho;

      out.H[k] = out.gamma_inv.c11[k] * out.h.c11[k] + 2.0 * out.gamma_inv.c12[k] * out.h.c12[k] +
                 out.gamma_inv.c22[k] * out.h.c22[k];
      out.rho[k] = rho;
      out.area_density[k] = rho * e2v;
      out.V[k] = std::exp(v[k]);
    }
  }
  out.K = detail::brioschi_curvature(out.gamma.c11, out.gamma.c12, out.gamma.c22);
  return out;
}

/// Laplace-Beltrami operator of the induced metric applied to f:
/// (1/sqrt det gamma) d_i (sqrt det gamma gamma^{ij} d_j f).
inline PeriodicField laplace_beltrami(const SurfaceGeometry& geom, const CovectorField& df) {
  const PeriodicField& a11 = geom.flux_metric.c11;
  const PeriodicField& a12 = geom.flux_metric.c12;
  const PeriodicField& a22 = geom.flux_metric.c22;
  PeriodicField f1(geom.grid()), f2(geom.grid());
  for (std::size_t k = 0; k < f1.size(); ++k) {
    f1[k] = a11[k] * df.d1[k] + a12[k] * df.d2[k];
    f2[k] = a12[k] * df.d1[k] + a22[k] * df.d2[k];
  }
  PeriodicField out = spectral_divergence(f1, f2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] /= geom.area_density[k];
  return out;
}

inline PeriodicField laplace_beltrami(const SurfaceGeometry& geom, const PeriodicField& f) {
  return laplace_beltrami(geom, spectral_gradient(f));
}

struct AdmissibilityReport {
  double K_min = 0.0;
  double H_min = 0.0;
  double min_principal_curvature = 0.0;
  bool h_posdef = false;
  bool admissible = false;
  std::string violation;  // first violated hypothesis, empty when admissible
};

/// Tolerance on the smallest eigenvalue of gamma^{-1} h.
inline constexpr double kPosDefTolerance = 1e-10;

/// Reports min K, min H and positive-definiteness of h. Admissible iff
/// K > -1, H > 0 and h is positive definite everywhere.
inline AdmissibilityReport admissibility_check(const SurfaceGeometry& geom) {
  AdmissibilityReport r;
  const Grid& g = geom.grid();
  r.K_min = std::numeric_limits<double>::infinity();
  r.H_min = std::numeric_limits<double>::infinity();
  r.min_principal_curvature = std::numeric_limits<double>::infinity();
  std::string k_fail, h_fail, pd_fail;
  auto where = [&](int i, int j) {
    return " at grid point (" + std::to_string(i) + "," + std::to_string(j) + ")";
  };
  for (int i = 0; i < g.n1(); ++i) {
    for (int j = 0; j < g.n2(); ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * g.n2() + j;
      const double lam = geom.shape_operator(k).eigenvalues()[0];
      r.K_min = std::min(r.K_min, geom.K[k]);
      r.H_min = std::min(r.H_min, geom.H[k]);
      r.min_principal_curvature = std::min(r.min_principal_curvature, lam);
      if (k_fail.empty() && !(geom.K[k] > -1.0)) k_fail = "K > -1 fails" + where(i, j);
      if (h_fail.empty() && !(geom.H[k] > 0.0)) h_fail = "H > 0 fails" + where(i, j);
      if (pd_fail.empty() && !(lam > kPosDefTolerance))
        pd_fail = "h positive definite fails" + where(i, j);
    }
  }
  r.h_posdef = pd_fail.empty();
  r.admissible = k_fail.empty() && h_fail.empty() && r.h_posdef;
  r.violation = !k_fail.empty() ? k_fail : !h_fail.empty() ? h_fail : pd_fail;
  return r;
}

/// Max absolute component, in a b-orthonormal frame, of
/// (Delta V) b - Hess V + V Ric(b) for V = e^s on b = ds^2 + e^{2s} sigma.
/// The Hessian is assembled from the warped-product Christoffel symbols
/// (Gamma^s_ij = -e^{2s} sigma_ij, Gamma^i_sj = delta^i_j) and the Ricci
/// tensor from its closed form (Ric_ss = -2, Ric_ij = -2 e^{2s} sigma_ij).
inline double static_identity_residual(std::span<const double> s_values, const FlatTorus& torus) {
  const double sig[2][2] = {{torus.s11(), torus.s12()}, {torus.s12(), torus.s22()}};
  const auto inv = torus.inverse();
  const double isig[2][2] = {{inv[0], inv[1]}, {inv[1], inv[2]}};
  // sigma = L L^T; the columns of L^{-T} are sigma-orthonormal.
  const double l11 = std::sqrt(sig[0][0]), l21 = sig[1][0] / l11;
  const double l22 = std::sqrt(sig[1][1] - l21 * l21);
  const double frame[2][2] = {{1.0 / l11, -l21 / (l11 * l22)}, {0.0, 1.0 / l22}};

  double worst = 0.0;
  for (double s : s_values) {
    const double V = std::exp(s), dV = V, ddV = V;  // d_s V, d_s^2 V
    const double e2s = std::exp(2.0 * s), es = std::exp(s);
    double b[3][3] = {}, hess[3][3] = {}, ric[3][3] = {};
    b[0][0] = 1.0;
    hess[0][0] = ddV;
    ric[0][0] = -2.0;
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) {
        b[a + 1][c + 1] = e2s * sig[a][c];
        hess[a + 1][c + 1] = -(-e2s * sig[a][c]) * dV;
        ric[a + 1][c + 1] = -2.0 * e2s * sig[a][c];
      }
    double lap = hess[0][0];
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) lap += isig[a][c] / e2s * hess[a + 1][c + 1];

    // Frame vectors as columns of P (coordinates s, theta^1, theta^2).
    double P[3][3] = {};
    P[0][0] = 1.0;
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) P[a + 1][c + 1] = frame[a][c] / es;
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) {
        double comp = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int c = 0; c < 3; ++c)
            comp += P[a][x] * P[c][y] * (lap * b[a][c] - hess[a][c] + V * ric[a][c]);
        worst = std::max(worst, std::abs(comp));
      }
  }
  return worst;
}

}  // namespace kml

#pragma once

// Uniform periodic grids on the flat torus with Fourier-collocation
// differentiation, trapezoidal quadrature and trigonometric interpolation.
//
// Coordinates theta^1, theta^2 always have period 2*pi; the geometry of the
// torus lives entirely in the constant metric coefficients sigma_ij.
// Samples are stored row-major: value(i, j) at (2*pi*i/n1, 2*pi*j/n2).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kml/error.hpp"
#include "kml/mat2.hpp"

namespace kml {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Constant flat metric sigma on T^2 (coordinate periods 2*pi).
class FlatTorus {
 public:
  FlatTorus() : FlatTorus(1.0, 0.0, 1.0) {}
  FlatTorus(double s11, double s12, double s22) : s11_(s11), s12_(s12), s22_(s22) {
    if (!(std::isfinite(s11) && std::isfinite(s12) && std::isfinite(s22)))
      throw UsageError("FlatTorus: non-finite metric coefficient");
    if (!(s11 > 0.0 && s11 * s22 - s12 * s12 > 0.0))
      throw UsageError("FlatTorus: sigma must be positive definite");
  }

  static FlatTorus identity() { return {}; }

  /// Torus with physical periods P1, P2 along orthogonal directions, mapped
  /// onto the 2*pi chart: sigma = diag((P1/2pi)^2, (P2/2pi)^2).
  static FlatTorus from_periods(double p1, double p2) {
    if (!(p1 > 0.0 && p2 > 0.0)) throw UsageError("FlatTorus: periods must be positive");
    return {(p1 / kTwoPi) * (p1 / kTwoPi), 0.0, (p2 / kTwoPi) * (p2 / kTwoPi)};
  }

  double s11() const { return s11_; }
  double s12() const { return s12_; }
  double s22() const { return s22_; }
  double det() const { return s11_ * s22_ - s12_ * s12_; }
  double sqrt_det() const { return std::sqrt(det()); }

  /// Inverse metric components sigma^{ij} as (11, 12, 22).
  std::array<double, 3> inverse() const {
    const double d = det();
    return {s22_ / d, -s12_ / d, s11_ / d};
  }

  /// A_sigma = (2 pi)^2 sqrt(det sigma).
  double area() const { return kTwoPi * kTwoPi * sqrt_det(); }

  friend bool operator==(const FlatTorus&, const FlatTorus&) = default;

 private:
  double s11_, s12_, s22_;
};

/// Uniform grid with n1 x n2 samples; both sizes even.
class Grid {
 public:
  Grid(int n1, int n2, FlatTorus torus = {}) : n1_(n1), n2_(n2), torus_(torus) {
    if (n1 <= 0 || n2 <= 0) throw UsageError("Grid: sizes must be positive");
    if (n1 % 2 != 0 || n2 % 2 != 0) throw UsageError("Grid: sizes must be even");
  }
  explicit Grid(int n, FlatTorus torus = {}) : Grid(n, n, torus) {}

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t size() const { return static_cast<std::size_t>(n1_) * n2_; }
  const FlatTorus& torus() const { return torus_; }

  double theta1(int i) const { return kTwoPi * i / n1_; }
  double theta2(int j) const { return kTwoPi * j / n2_; }
  double spacing() const { return kTwoPi / std::max(n1_, n2_); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int n1_, n2_;
  FlatTorus torus_;
};

/// Real samples of a scalar function on a Grid.
class PeriodicField {
 public:
  explicit PeriodicField(const Grid& grid, double value = 0.0)
      : grid_(grid), values_(grid.size(), value) {}
  PeriodicField(const Grid& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw UsageError("PeriodicField: size mismatch");
  }

  /// Samples f(theta1, theta2) at every grid point.
  template <class F>
  static PeriodicField sample(const Grid& grid, F&& f) {
    PeriodicField out(grid);
    for (int i = 0; i < grid.n1(); ++i)
      for (int j = 0; j < grid.n2(); ++j) out(i, j) = f(grid.theta1(i), grid.theta2(j));
    return out;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * grid_.n2() + j]; }
  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * grid_.n2() + j];
  }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double x : values_) m = std::max(m, std::abs(x));
    return m;
  }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  /// Pointwise f(x).
  template <class F>
  PeriodicField map(F&& f) const {
    PeriodicField out(grid_);
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = f(values_[k]);
    return out;
  }

  PeriodicField& operator+=(const PeriodicField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  PeriodicField& operator-=(const PeriodicField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  PeriodicField& operator*=(const PeriodicField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] *= o.values_[k];
    return *this;
  }
  PeriodicField& operator*=(double s) {
    for (double& x : values_) x *= s;
    return *this;
  }
  PeriodicField& operator+=(double s) {
    for (double& x : values_) x += s;
    return *this;
  }
  /// this += s * o
  PeriodicField& axpy(double s, const PeriodicField& o) {
    check_same(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
    return *this;
  }

  friend PeriodicField operator+(PeriodicField a, const PeriodicField& b) { return a += b; }
  friend PeriodicField operator-(PeriodicField a, const PeriodicField& b) { return a -= b; }
  friend PeriodicField operator*(PeriodicField a, const PeriodicField& b) { return a *= b; }
  friend PeriodicField operator*(double s, PeriodicField a) { return a *= s; }
  friend PeriodicField operator+(PeriodicField a, double s) { return a += s; }

 private:
  void check_same(const PeriodicField& o) const {
    if (!(o.grid_ == grid_)) throw UsageError("PeriodicField: grid mismatch");
  }

  Grid grid_;
  std::vector<double> values_;
};

/// Covector field v_i = d_i v.
struct CovectorField {
  PeriodicField d1, d2;
};

/// Symmetric 2-tensor field (components 11, 12, 22).
struct SymTensorField {
  PeriodicField c11, c12, c22;
};

/// Sup distance between two fields on the same grid.
inline double sup_distance(const PeriodicField& a, const PeriodicField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// Half-complex Fourier coefficients of a real field, n1 x (n2/2 + 1),
/// unnormalized (FFTW convention).
struct Spectrum {
  Grid grid;
  std::vector<std::complex<double>> coeffs;

  int cols() const { return grid.n2() / 2 + 1; }
  std::complex<double>& at(int k1, int k2) {
    return coeffs[static_cast<std::size_t>(k1) * cols() + k2];
  }
  std::complex<double> at(int k1, int k2) const {
    return coeffs[static_cast<std::size_t>(k1) * cols() + k2];
  }
};

namespace detail {

/// FFTW plans bound to their own aligned buffers. Plans are always executed on
/// these buffers so that results do not depend on caller memory alignment.
class FourierPlan {
 public:
  FourierPlan(int n1, int n2) : n1_(n1), n2_(n2) {
    const std::size_t nreal = static_cast<std::size_t>(n1) * n2;
    const std::size_t ncplx = static_cast<std::size_t>(n1) * (n2 / 2 + 1);
    real_ = fftw_alloc_real(nreal);
    cplx_ = fftw_alloc_complex(ncplx);
    if (real_ == nullptr || cplx_ == nullptr) throw SolverError("FFTW allocation failed");
    forward_ = fftw_plan_dft_r2c_2d(n1, n2, real_, cplx_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(n1, n2, cplx_, real_, FFTW_ESTIMATE);
    if (forward_ == nullptr || backward_ == nullptr) throw SolverError("FFTW planning failed");
  }
  FourierPlan(const FourierPlan&) = delete;
  FourierPlan& operator=(const FourierPlan&) = delete;
  ~FourierPlan() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(forward_);
    const auto* c = reinterpret_cast<const std::complex<double>*>(cplx_);
    std::copy(c, c + out.size(), out.begin());
  }

  /// Unnormalized inverse; the input spectrum is left untouched.
  void backward(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
    std::copy(in.begin(), in.end(), c);
    fftw_execute(backward_);
    std::copy(real_, real_ + out.size(), out.begin());
  }

 private:
  int n1_, n2_;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// FFTW's planner is not thread-safe; plans are cached per thread.
inline FourierPlan& plan_for(const Grid& g) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<FourierPlan>> cache;
  auto& slot = cache[{g.n1(), g.n2()}];
  if (!slot) slot = std::make_unique<FourierPlan>(g.n1(), g.n2());
  return *slot;
}

/// Signed wavenumber for index k on an n-point axis; Nyquist maps to +n/2.
inline int wavenumber(int k, int n) { return k <= n / 2 ? k : k - n; }

/// Multiplier of the order-p derivative (p <= 2) for index k. The Nyquist
/// mode has no well-defined odd derivative and is zeroed.
inline std::complex<double> derivative_factor(int k, int n, int p) {
  const int kk = wavenumber(k, n);
  switch (p) {
    case 0:
      return 1.0;
    case 1:
      return (2 * k == n) ? 0.0 : std::complex<double>(0.0, kk);
    case 2:
      return -static_cast<double>(kk) * kk;
    default:
      throw UsageError("spectral derivative order must be 0, 1 or 2");
  }
}

}  // namespace detail

inline Spectrum forward_transform(const PeriodicField& f) {
  Spectrum s{f.grid(), {}};
  s.coeffs.resize(static_cast<std::size_t>(f.grid().n1()) * s.cols());
  detail::plan_for(f.grid()).forward(f.values(), s.coeffs);
  return s;
}

/// Field whose samples are d1^p1 d2^p2 of the trigonometric interpolant
/// represented by the spectrum.
inline PeriodicField derivative(const Spectrum& s, int p1, int p2) {
  const Grid& g = s.grid;
  const int cols = s.cols();
  std::vector<std::complex<double>> work(s.coeffs.size());
  std::vector<std::complex<double>> f2(cols);
  for (int k2 = 0; k2 < cols; ++k2) f2[k2] = detail::derivative_factor(k2, g.n2(), p2);
  for (int k1 = 0; k1 < g.n1(); ++k1) {
    const auto f1 = detail::derivative_factor(k1, g.n1(), p1);
    for (int k2 = 0; k2 < cols; ++k2) work[static_cast<std::size_t>(k1) * cols + k2] =
        f1 * f2[k2] * s.at(k1, k2);
  }
  PeriodicField out(g);
  detail::plan_for(g).backward(work, out.values());
  out *= 1.0 / static_cast<double>(g.size());
  return out;
}

/// d1(a) + d2(b) evaluated with a single inverse transform.
inline PeriodicField spectral_divergence(const PeriodicField& a, const PeriodicField& b) {
  const Spectrum sa = forward_transform(a);
  const Spectrum sb = forward_transform(b);
  const Grid& g = a.grid();
  const int cols = sa.cols();
  std::vector<std::complex<double>> work(sa.coeffs.size());
  for (int k1 = 0; k1 < g.n1(); ++k1) {
    const auto f1 = detail::derivative_factor(k1, g.n1(), 1);
    for (int k2 = 0; k2 < cols; ++k2) {
      const auto f2 = detail::derivative_factor(k2, g.n2(), 1);
      work[static_cast<std::size_t>(k1) * cols + k2] = f1 * sa.at(k1, k2) + f2 * sb.at(k1, k2);
    }
  }
  PeriodicField out(g);
  detail::plan_for(g).backward(work, out.values());
  out *= 1.0 / static_cast<double>(g.size());
  return out;
}

inline PeriodicField spectral_derivative(const PeriodicField& f, int p1, int p2) {
  return derivative(forward_transform(f), p1, p2);
}

/// Components v_i = d v / d theta^i of the trigonometric interpolant.
inline CovectorField spectral_gradient(const PeriodicField& f) {
  const Spectrum s = forward_transform(f);
  return {derivative(s, 1, 0), derivative(s, 0, 1)};
}

/// Coordinate Hessian d_i d_j v. Sigma is constant, so this is also the
/// covariant Hessian of sigma.
inline SymTensorField spectral_hessian(const PeriodicField& f) {
  const Spectrum s = forward_transform(f);
  return {derivative(s, 2, 0), derivative(s, 1, 1), derivative(s, 0, 2)};
}

/// Raises a covector with sigma: v^i = sigma^{ij} v_j.
inline CovectorField raise_index(const FlatTorus& t, const CovectorField& v) {
  const auto [i11, i12, i22] = t.inverse();
  CovectorField out{PeriodicField(v.d1.grid()), PeriodicField(v.d1.grid())};
  for (std::size_t k = 0; k < v.d1.size(); ++k) {
    out.d1[k] = i11 * v.d1[k] + i12 * v.d2[k];
    out.d2[k] = i12 * v.d1[k] + i22 * v.d2[k];
  }
  return out;
}

/// (2 pi / n1)(2 pi / n2) * sum of samples, summed in storage order.
/// Multiply by sqrt(det sigma) for integrals against dA_sigma.
inline double integrate(const PeriodicField& density) {
  const Grid& g = density.grid();
  double sum = 0.0;
  for (double x : density.values()) sum += x;
  return (kTwoPi / g.n1()) * (kTwoPi / g.n2()) * sum;
}

/// Integral against dA_sigma.
inline double integrate_area(const PeriodicField& density) {
  return integrate(density) * density.grid().torus().sqrt_det();
}

/// Evaluates trigonometric interpolants of one or more fields at arbitrary
/// points. Nyquist modes are symmetrized (cosine form) so the interpolant is
/// real and reproduces the samples exactly.
class TrigInterpolant {
 public:
  explicit TrigInterpolant(std::span<const PeriodicField* const> fields) { init(fields); }
  explicit TrigInterpolant(const PeriodicField& f) {
    const PeriodicField* p = &f;
    init(std::span<const PeriodicField* const>(&p, 1));
  }

  std::size_t field_count() const { return spectra_.size(); }

  /// Values of every field at (x1, x2); out.size() == field_count().
  void evaluate(double x1, double x2, std::span<double> out) const {
    const Grid& g = *grid_;
    const int cols = g.n2() / 2 + 1;
    e1_.resize(g.n1());
    e2_.resize(cols);
    for (int k1 = 0; k1 < g.n1(); ++k1) {
      const int kk = detail::wavenumber(k1, g.n1());
      e1_[k1] = (2 * k1 == g.n1()) ? std::complex<double>(std::cos(kk * x1), 0.0)
                                   : std::polar(1.0, kk * x1);
    }
    for (int k2 = 0; k2 < cols; ++k2) {
      e2_[k2] = (2 * k2 == g.n2()) ? std::complex<double>(std::cos(k2 * x2), 0.0)
                                   : std::polar(1.0, k2 * x2);
    }
    for (std::size_t f = 0; f < spectra_.size(); ++f) {
      const Spectrum& s = spectra_[f];
      std::complex<double> total = 0.0;
      for (int k1 = 0; k1 < g.n1(); ++k1) {
        std::complex<double> row = 0.0;
        const std::complex<double>* c = &s.coeffs[static_cast<std::size_t>(k1) * cols];
        for (int k2 = 0; k2 < cols; ++k2) row += c[k2] * e2_[k2];
        total += e1_[k1] * row;
      }
      out[f] = total.real();
    }
  }

  double operator()(double x1, double x2) const {
    double v = 0.0;
    evaluate(x1, x2, std::span(&v, 1));
    return v;
  }

 private:
  void init(std::span<const PeriodicField* const> fields) {
    if (fields.empty()) throw UsageError("TrigInterpolant: no fields");
    grid_ = std::make_unique<Grid>(fields.front()->grid());
    const double norm = 1.0 / static_cast<double>(grid_->size());
    const int cols = grid_->n2() / 2 + 1;
    for (const PeriodicField* f : fields) {
      Spectrum s = forward_transform(*f);
      for (int k1 = 0; k1 < grid_->n1(); ++k1)
        for (int k2 = 0; k2 < cols; ++k2) {
          const bool edge = (k2 == 0) || (2 * k2 == grid_->n2());
          s.at(k1, k2) *= (edge ? 1.0 : 2.0) * norm;
        }
      spectra_.push_back(std::move(s));
    }
  }

  std::unique_ptr<Grid> grid_;
  std::vector<Spectrum> spectra_;
  mutable std::vector<std::complex<double>> e1_, e2_;
};

}  // namespace kml

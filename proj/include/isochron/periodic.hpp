#pragma once

// Real 1-periodic functions sampled on equispaced grids, with a trigonometric
// coefficient view. Samples are the ground truth; coefficients are computed
// eagerly at construction so values are immutable and safe to share.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isochron/error.hpp"

namespace isochron {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place radix-2 FFT. Forward uses e^{-2 pi i k m / n}; no normalization.
inline void fft(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) fail(ErrorKind::invalid_input, "fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::size_t half = len / 2;
    std::vector<cplx> w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

/// Precomputed e^{2 pi i k theta} for k = 0..n/2-1 plus the Nyquist cosine,
/// shared by every function evaluated at the same angle.
class Phases {
 public:
  Phases(double theta, std::size_t n) : e_(n / 2) {
    theta -= std::floor(theta);
    const cplx e1 = std::polar(1.0, kTwoPi * theta);
    cplx e{1.0, 0.0};
    for (std::size_t k = 0; k < e_.size(); ++k) {
      // re-anchor periodically to keep the recurrence error near round-off
      if (k % 16 == 0) e = std::polar(1.0, kTwoPi * theta * static_cast<double>(k));
      e_[k] = e;
      e *= e1;
    }
    nyquist_ = std::cos(std::numbers::pi * static_cast<double>(n) * theta);
  }
  const cplx& operator[](std::size_t k) const { return e_[k]; }
  std::size_t size() const { return e_.size(); }
  double nyquist() const { return nyquist_; }

 private:
  std::vector<cplx> e_;
  double nyquist_ = 0.0;
};

class PeriodicFn {
 public:
  PeriodicFn() = default;

  /// Builds from samples at theta_m = m/n; n must be a power of two >= 8.
  static PeriodicFn from_values(std::vector<double> values) {
    const std::size_t n = values.size();
    if (n < 8 || !is_power_of_two(n))
      fail(ErrorKind::invalid_input,
           "periodic sample count must be a power of two >= 8, got " + std::to_string(n));
    for (double v : values)
      if (!std::isfinite(v)) fail(ErrorKind::numerical, "non-finite periodic sample");
    PeriodicFn f;
    f.values_ = std::move(values);
    std::vector<cplx> a(f.values_.begin(), f.values_.end());
    fft(a, false);
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& c : a) c *= inv;
    f.coeffs_ = std::move(a);
    f.symmetrize();
    return f;
  }

  /// Builds from the full FFT-ordered coefficient array (index n-k holds c_{-k}).
  /// The supplied coefficients are kept verbatim as the spectral view.
  static PeriodicFn from_coeffs(std::vector<cplx> coeffs) {
    const std::size_t n = coeffs.size();
    if (n < 8 || !is_power_of_two(n))
      fail(ErrorKind::invalid_input, "periodic coefficient count must be a power of two >= 8");
    PeriodicFn f;
    f.coeffs_ = std::move(coeffs);
    f.symmetrize();
    std::vector<cplx> a = f.coeffs_;
    fft(a, true);
    f.values_.resize(n);
    for (std::size_t m = 0; m < n; ++m) f.values_[m] = a[m].real();
    for (double v : f.values_)
      if (!std::isfinite(v)) fail(ErrorKind::numerical, "non-finite periodic coefficient");
    return f;
  }

  static PeriodicFn constant(std::size_t n, double c) {
    return from_values(std::vector<double>(n, c));
  }

  template <class F>
  static PeriodicFn sample(std::size_t n, F&& fn) {
    std::vector<double> v(n);
    for (std::size_t m = 0; m < n; ++m) v[m] = fn(node(m, n));
    return from_values(std::move(v));
  }

  static double node(std::size_t m, std::size_t n) {
    return static_cast<double>(m) / static_cast<double>(n);
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t m) const { return values_[m]; }

  /// Coefficient c_k for -n/2 <= k <= n/2 (c_{n/2} is the Nyquist cosine amplitude).
  cplx coeff(long k) const {
    const long n = static_cast<long>(size());
    return coeffs_[static_cast<std::size_t>(((k % n) + n) % n)];
  }
  const std::vector<cplx>& coeffs() const { return coeffs_; }

  double mean() const { return coeffs_[0].real(); }

  double eval(double theta) const {
    const std::size_t n = size();
    theta -= std::floor(theta);
    const double x = theta * static_cast<double>(n);
    if (x == std::floor(x)) return values_[static_cast<std::size_t>(x) % n];
    return eval(Phases(theta, n));
  }

  double eval(const Phases& ph) const {
    const std::size_t half = size() / 2;
    double s = coeffs_[0].real();
    for (std::size_t k = 1; k < half; ++k) s += 2.0 * (coeffs_[k] * ph[k]).real();
    return s + coeffs_[half].real() * ph.nyquist();
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Trigonometric resampling onto an m-point grid (zero padding or truncation).
  PeriodicFn resample(std::size_t m) const {
    const std::size_t n = size();
    if (m == n) return *this;
    std::vector<cplx> c(m, cplx{});
    const std::size_t half = std::min(n, m) / 2;
    for (std::size_t k = 0; k < half; ++k) {
      c[k] = coeffs_[k];
      if (k) c[m - k] = coeffs_[n - k];
    }
    if (m > n) {
      // Nyquist cosine of the coarse grid becomes a genuine +-n/2 pair.
      c[n / 2] = 0.5 * coeffs_[n / 2];
      c[m - n / 2] = 0.5 * coeffs_[n / 2];
    }
    return from_coeffs(std::move(c));
  }

  /// Zeroes modes with |k| > n/3 (2/3 rule) and the Nyquist mode.
  PeriodicFn dealiased() const {
    const std::size_t n = size();
    std::vector<cplx> c = coeffs_;
    const std::size_t keep = n / 3;
    for (std::size_t k = keep + 1; k <= n / 2; ++k) {
      c[k] = 0.0;
      c[n - k] = 0.0;
    }
    return from_coeffs(std::move(c));
  }

  friend PeriodicFn operator+(const PeriodicFn& a, const PeriodicFn& b) {
    return zip(a, b, [](double x, double y) { return x + y; });
  }
  friend PeriodicFn operator-(const PeriodicFn& a, const PeriodicFn& b) {
    return zip(a, b, [](double x, double y) { return x - y; });
  }
  friend PeriodicFn operator*(const PeriodicFn& a, const PeriodicFn& b) {
    return zip(a, b, [](double x, double y) { return x * y; });
  }
  friend PeriodicFn operator*(double s, const PeriodicFn& a) {
    std::vector<double> v = a.values_;
    for (double& x : v) x *= s;
    return from_values(std::move(v));
  }
  PeriodicFn operator+(double c) const {
    std::vector<double> v = values_;
    for (double& x : v) x += c;
    return from_values(std::move(v));
  }

  template <class Op>
  static PeriodicFn zip(const PeriodicFn& a, const PeriodicFn& b, Op op) {
    if (a.size() != b.size()) fail(ErrorKind::invalid_input, "periodic grids differ");
    std::vector<double> v(a.size());
    for (std::size_t m = 0; m < v.size(); ++m) v[m] = op(a.values_[m], b.values_[m]);
    return from_values(std::move(v));
  }

 private:
  void symmetrize() {
    const std::size_t n = coeffs_.size();
    coeffs_[0] = cplx(coeffs_[0].real(), 0.0);
    coeffs_[n / 2] = cplx(coeffs_[n / 2].real(), 0.0);
    for (std::size_t k = 1; k < n / 2; ++k) {
      const cplx c = 0.5 * (coeffs_[k] + std::conj(coeffs_[n - k]));
      coeffs_[k] = c;
      coeffs_[n - k] = std::conj(c);
    }
  }

  std::vector<double> values_;
  std::vector<cplx> coeffs_;
};

inline PeriodicFn make_periodic(std::vector<double> values) {
  return PeriodicFn::from_values(std::move(values));
}

inline double eval_periodic(const PeriodicFn& f, double theta) { return f.eval(theta); }

/// m-th spectral derivative; the Nyquist mode is dropped.
inline PeriodicFn differentiate(const PeriodicFn& f, int order = 1) {
  if (order == 0) return f;
  const std::size_t n = f.size();
  std::vector<cplx> c(n, cplx{});
  for (std::size_t k = 1; k < n / 2; ++k) {
    const cplx ik(0.0, kTwoPi * static_cast<double>(k));
    cplx mult = std::pow(ik, order);
    c[k] = f.coeffs()[k] * mult;
    c[n - k] = std::conj(c[k]);
  }
  return PeriodicFn::from_coeffs(std::move(c));
}

/// Splits g = mean + G' with G periodic and G(0) = 0.
inline std::pair<double, PeriodicFn> antiderivative_zero_mean(const PeriodicFn& g) {
  const std::size_t n = g.size();
  std::vector<cplx> c(n, cplx{});
  for (std::size_t k = 1; k < n / 2; ++k) {
    c[k] = g.coeffs()[k] / cplx(0.0, kTwoPi * static_cast<double>(k));
    c[n - k] = std::conj(c[k]);
  }
  PeriodicFn G = PeriodicFn::from_coeffs(std::move(c));
  std::vector<double> v = G.values();
  const double shift = v[0];
  for (double& x : v) x -= shift;
  return {g.mean(), PeriodicFn::from_values(std::move(v))};
}

/// Solves a u' + c u = g for periodic u by dividing each mode by c + 2 pi i k a.
inline PeriodicFn spectral_solve(const PeriodicFn& g, double a, double c) {
  if (std::abs(c) < 1e-12 * (1.0 + kTwoPi * std::abs(a)))
    fail(ErrorKind::numerical, "spectral_solve: singular constant mode");
  const std::size_t n = g.size();
  std::vector<cplx> u(n, cplx{});
  u[0] = g.coeffs()[0] / c;
  for (std::size_t k = 1; k < n / 2; ++k) {
    u[k] = g.coeffs()[k] / cplx(c, kTwoPi * static_cast<double>(k) * a);
    u[n - k] = std::conj(u[k]);
  }
  return PeriodicFn::from_coeffs(std::move(u));
}

/// Degree-one circle lift theta -> theta + p(theta).
struct TorusLift {
  PeriodicFn periodic;

  static TorusLift identity(std::size_t n) { return {PeriodicFn::constant(n, 0.0)}; }
  double value(double theta) const { return theta + periodic.eval(theta); }
  double value_at_node(std::size_t m) const {
    return PeriodicFn::node(m, periodic.size()) + periodic[m];
  }
};

/// Samples f(theta_m + delta(theta_m)) on f's grid.
inline PeriodicFn compose_shift(const PeriodicFn& f, const PeriodicFn& delta) {
  const std::size_t n = f.size();
  std::vector<double> v(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double th = PeriodicFn::node(m, n);
    v[m] = f.eval(th + delta.eval(th));
  }
  return PeriodicFn::from_values(std::move(v));
}

inline TorusLift compose_shift(const TorusLift& f, const PeriodicFn& delta) {
  const std::size_t n = f.periodic.size();
  std::vector<double> v(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double th = PeriodicFn::node(m, n);
    const double x = th + delta.eval(th);
    v[m] = (x + f.periodic.eval(x)) - th;
  }
  return {PeriodicFn::from_values(std::move(v))};
}

/// A pair of functions of theta. When `lift` is set the first component is
/// the torus lift theta + comp1(theta); otherwise both are periodic.
struct PlaneLoop {
  PeriodicFn comp1;
  PeriodicFn comp2;
  bool lift = false;

  static PlaneLoop identity(std::size_t n) {
    return {PeriodicFn::constant(n, 0.0), PeriodicFn::constant(n, 0.0), true};
  }
  static PlaneLoop constant(std::size_t n, double a, double b) {
    return {PeriodicFn::constant(n, a), PeriodicFn::constant(n, b), false};
  }

  std::size_t size() const { return comp1.size(); }
  const PeriodicFn& comp(int i) const { return i == 0 ? comp1 : comp2; }

  /// Full value of component i at grid node m (including the identity part).
  double node_value(int i, std::size_t m) const {
    if (i == 0) return comp1[m] + (lift ? PeriodicFn::node(m, size()) : 0.0);
    return comp2[m];
  }
  double value(int i, double theta) const {
    if (i == 0) return comp1.eval(theta) + (lift ? theta : 0.0);
    return comp2.eval(theta);
  }

  PlaneLoop resample(std::size_t m) const { return {comp1.resample(m), comp2.resample(m), lift}; }
};

/// Grid sup distance max_i sup_m |f_i - g_i|; identical lift parts cancel.
inline double c0_distance(const PlaneLoop& f, const PlaneLoop& g) {
  if (f.size() != g.size()) {
    const std::size_t n = std::max(f.size(), g.size());
    return c0_distance(f.resample(n), g.resample(n));
  }
  double d = 0.0;
  for (std::size_t m = 0; m < f.size(); ++m) {
    const double d1 = f.lift == g.lift ? f.comp1[m] - g.comp1[m]
                                       : f.node_value(0, m) - g.node_value(0, m);
    d = std::max({d, std::abs(d1), std::abs(f.comp2[m] - g.comp2[m])});
  }
  return d;
}

}  // namespace isochron

#pragma once

// Shared fixtures and independent oracles for the solver and validation tests.

#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "isochron/isochron.hpp"

namespace testing_support {

using namespace isochron;

inline const std::string kFixtures = ISOCHRON_FIXTURES;

inline Model fixture(const std::string& name) { return load_model(kFixtures + "/" + name); }

inline Model hopf(double eps) {
  Model m = fixture("hopf_delay.json");
  m.eps = eps;
  return m;
}

/// A coordinates model built from expression text.
inline Model coords_model(const std::string& y1, const std::string& y2, const std::string& rho, double eps,
                          double h, double lambda0 = -2.0, double omega0 = 1.0) {
  json j = {{"type", "coords"}, {"omega0", omega0}, {"lambda0", lambda0}, {"eps", eps}, {"h", h},
            {"Y", {y1, y2}},    {"rho", rho},       {"cutoff", {{"a1", 0.5}, {"a2", 1.0}}}};
  return model_from_json(j);
}

/// Trapezoid mean over one period; spectrally accurate for smooth periodic f.
inline double period_mean(const std::function<double(double)>& f, int n = 256) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += f(static_cast<double>(i) / n);
  return acc / n;
}

// ---- first-order oracle for the Hopf fixture, written from X, r and K directly ----

struct HopfOracle {
  const Model& m;  // used only for X(x, y) and r(x) point evaluations

  static std::array<double, 2> K(double th, double s) {
    const double a = 1.0 / std::sqrt(1.0 + s);
    return {a * std::cos(kTwoPi * th), a * std::sin(kTwoPi * th)};
  }
  /// Columns d/dtheta and d/ds of K.
  static std::array<std::array<double, 2>, 2> DK(double th, double s) {
    const double a = 1.0 / std::sqrt(1.0 + s), b = -0.5 * a / (1.0 + s);
    const double c = std::cos(kTwoPi * th), sn = std::sin(kTwoPi * th);
    return {{{kTwoPi * a * -sn, kTwoPi * a * c}, {b * c, b * sn}}};
  }

  /// Y(u, v) at eps -> 0: DK(u)^{-1} D_y X(K(u), 0) K(v), with D_y X by central differences.
  std::array<double, 2> Y0(double u1, double u2, double v1, double v2) const {
    const auto x = K(u1, u2), y = K(v1, v2);
    const double h = 1e-4;
    const auto fp = m.evalX<double>(x, {h * y[0], h * y[1]});
    const auto fm = m.evalX<double>(x, {-h * y[0], -h * y[1]});
    const std::array<double, 2> p{(fp[0] - fm[0]) / (2 * h), (fp[1] - fm[1]) / (2 * h)};
    const auto d = DK(u1, u2);
    // solve [d0 d1] q = p
    const double det = d[0][0] * d[1][1] - d[1][0] * d[0][1];
    return {(p[0] * d[1][1] - p[1] * d[1][0]) / det, (d[0][0] * p[1] - d[0][1] * p[0]) / det};
  }

  double rho(double th, double s) const { return m.eval_r<double>(K(th, s)); }

  /// d omega / d eps at eps = 0: mean of Y1 along the cycle with its delayed copy.
  double omega_slope() const {
    return period_mean([&](double th) {
      return Y0(th, 0.0, th - m.omega0 * rho(th, 0.0), 0.0)[0];
    });
  }

  /// d lambda / d eps at eps = 0:
  ///   mean of d_{u2}Y2 - omega0 d_s rho d_{v1}Y2 + exp(-lambda0 rho) d_{v2}Y2.
  double lambda_slope() const {
    const double h = 1e-5;
    return period_mean([&](double th) {
      const double r = rho(th, 0.0);
      const double v1 = th - m.omega0 * r;
      const double drho = (rho(th, h) - rho(th, -h)) / (2 * h);
      const double du2 = (Y0(th, h, v1, 0)[1] - Y0(th, -h, v1, 0)[1]) / (2 * h);
      const double dv1 = (Y0(th, 0, v1 + h, 0)[1] - Y0(th, 0, v1 - h, 0)[1]) / (2 * h);
      const double dv2 = (Y0(th, 0, v1, h)[1] - Y0(th, 0, v1, -h)[1]) / (2 * h);
      return du2 - m.omega0 * drho * dv1 + std::exp(-m.lambda0 * r) * dv2;
    });
  }
};

/// Root of f on [a, b] by bisection; f(a) and f(b) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b), fc = f(c);
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace testing_support

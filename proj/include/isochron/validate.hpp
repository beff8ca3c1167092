#pragma once

// Independent checks of a Solution against the original Cartesian delay
// equation x' = X(x, eps x(t - r(x))): a method-of-steps integrator, the
// defect along the parameterized family, empirical rates, and the
// a-posteriori summary of the solver reports.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "isochron/error.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/series.hpp"
#include "isochron/solution.hpp"
#include "isochron/tail.hpp"

namespace isochron {

using Point = std::array<double, 2>;

/// Uniform-step samples with cubic Hermite dense output.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Point> x, dx;

  std::size_t size() const { return x.size(); }
  double t(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  double t_end() const { return t(size() - 1); }

  Point at(double t) const {
    if (x.empty()) fail(ErrorKind::invalid_input, "empty trajectory");
    const double u = (t - t0) / dt;
    if (u < -1e-9 || u > static_cast<double>(size() - 1) + 1e-9)
      fail(ErrorKind::domain, "trajectory lookup outside the stored range");
    // node times reproduce their stored values even when t(k) rounds off the grid
    const double kr = std::clamp(std::round(u), 0.0, static_cast<double>(size() - 1));
    if (t == this->t(static_cast<std::size_t>(kr))) return x[static_cast<std::size_t>(kr)];
    std::size_t k = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(size() - 1)));
    if (k == size() - 1) {
      if (u == static_cast<double>(k)) return x[k];
      --k;
    }
    const double a = u - static_cast<double>(k);
    if (a == 0.0) return x[k];
    return hermite(k, a);
  }

  /// Cubic continuation of the last segment past the final node.
  Point extrapolate(double t) const {
    if (size() < 2) {
      const double h = t - t0;
      return {x[0][0] + h * dx[0][0], x[0][1] + h * dx[0][1]};
    }
    return hermite(size() - 2, (t - this->t(size() - 2)) / dt);
  }

 private:
  Point hermite(std::size_t k, double a) const {
    const double h00 = (1 + 2 * a) * (1 - a) * (1 - a), h10 = a * (1 - a) * (1 - a);
    const double h01 = a * a * (3 - 2 * a), h11 = a * a * (a - 1);
    Point p;
    for (int c = 0; c < 2; ++c)
      p[c] = h00 * x[k][c] + h10 * dt * dx[k][c] + h01 * x[k + 1][c] + h11 * dt * dx[k + 1][c];
    return p;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "t,x1,x2\n";
  for (std::size_t k = 0; k < tr.size(); ++k)
    out += format_double(tr.t(k)) + "," + format_double(tr.x[k][0]) + "," + format_double(tr.x[k][1]) + "\n";
  return out;
}

inline void require_cartesian(const Model& m) {
  if (m.kind != Model::Kind::cartesian)
    fail(ErrorKind::invalid_input, "validation needs a Cartesian model (X, r, K)");
}

using History = std::function<Point(double)>;

/// Classical RK4 with fixed step. Delayed values come from the history for
/// arguments <= 0 and from the dense output otherwise; each stage uses the lag
/// at its own state estimate.
inline Trajectory sdde_integrate(const Model& cm, const History& history, double T, double dt,
                                 double hbar) {
  require_cartesian(cm);
  if (!(dt > 0.0)) fail(ErrorKind::invalid_input, "dt must be positive");
  if (!(T >= 0.0)) fail(ErrorKind::invalid_input, "T must be non-negative");
  const std::size_t steps = static_cast<std::size_t>(std::llround(T / dt));
  Trajectory tr;
  tr.t0 = 0.0;
  tr.dt = dt;
  tr.x.reserve(steps + 1);
  tr.dx.reserve(steps + 1);

  auto rhs = [&](double t, const Point& x) -> Point {
    const double r = cm.eval_r(x);
    if (r < 0.0) fail(ErrorKind::domain, "negative lag would look ahead of the current time");
    if (r > hbar) fail(ErrorKind::domain, "lag " + std::to_string(r) + " exceeds the history span");
    const double tau = t - r;
    Point xd;
    if (tau <= 0.0) xd = history(tau);
    else if (tau <= tr.t_end()) xd = tr.at(tau);
    else xd = tr.extrapolate(tau);
    const auto f = cm.evalX<double>(x, {cm.eps * xd[0], cm.eps * xd[1]});
    if (!std::isfinite(f[0]) || !std::isfinite(f[1])) fail(ErrorKind::numerical, "non-finite state derivative");
    return f;
  };

  Point x = history(0.0);
  tr.x.push_back(x);
  tr.dx.push_back({0.0, 0.0});
  tr.dx[0] = rhs(0.0, x);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = tr.t(k);
    const Point k1 = tr.dx[k];
    auto shift = [&](const Point& kk, double a) { return Point{x[0] + a * kk[0], x[1] + a * kk[1]}; };
    const Point k2 = rhs(t + 0.5 * dt, shift(k1, 0.5 * dt));
    const Point k3 = rhs(t + 0.5 * dt, shift(k2, 0.5 * dt));
    const Point k4 = rhs(t + dt, shift(k3, dt));
    for (int c = 0; c < 2; ++c) x[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) fail(ErrorKind::numerical, "non-finite state");
    tr.x.push_back(x);
    tr.dx.push_back({0.0, 0.0});
    tr.dx[k + 1] = rhs(t + dt, x);
  }
  return tr;
}

/// t -> K(W(theta + omega t, s e^{lambda t})) with its time derivative.
class Parameterization {
 public:
  Parameterization(const Model& cm, const Solution& sol, double theta, double s)
      : cm_(cm), sol_(sol), field_(sol.W, sol.tail), theta_(theta), s_(s) {
    require_cartesian(cm);
  }

  Point x(double t) const {
    const double sig = s_ * std::exp(sol_.lambda * t);
    const auto w = field_.W(theta_ + sol_.omega * t, sig);
    return cm_.evalK(w[0], w[1]);
  }

  /// {x, x'} at time t.
  std::pair<Point, Point> x_dx(double t) const {
    const double sig = s_ * std::exp(sol_.lambda * t);
    const auto d = field_.W_d(theta_ + sol_.omega * t, sig);
    const auto dk = cm_.evalDK(d[0][0], d[0][1]);
    Point wdot;
    for (int c = 0; c < 2; ++c) wdot[c] = sol_.omega * d[1][c] + sol_.lambda * sig * d[2][c];
    const Point k = cm_.evalK(d[0][0], d[0][1]);
    return {k, {dk[0][0] * wdot[0] + dk[0][1] * wdot[1], dk[1][0] * wdot[0] + dk[1][1] * wdot[1]}};
  }

  History history() const {
    return [this](double t) { return x(t); };
  }

 private:
  const Model& cm_;
  const Solution& sol_;
  TailField field_;
  double theta_, s_;
};

inline Trajectory parameterized_orbit(const Model& cm, const Solution& sol, double theta, double s,
                                      double t0, double dt, std::size_t count) {
  const Parameterization p(cm, sol, theta, s);
  Trajectory tr;
  tr.t0 = t0;
  tr.dt = dt;
  for (std::size_t k = 0; k < count; ++k) {
    const auto [x, dx] = p.x_dx(tr.t(k));
    tr.x.push_back(x);
    tr.dx.push_back(dx);
  }
  return tr;
}

/// sup_t |x'(t) - X(x(t), eps x(t - r(x(t))))| on n_pts points of [0, T],
/// every term taken from the parameterization.
inline double defect_norm(const Model& cm, const Solution& sol, double theta, double s, double T,
                          std::size_t n_pts) {
  const Parameterization p(cm, sol, theta, s);
  double worst = 0.0;
  for (std::size_t k = 0; k < n_pts; ++k) {
    const double t = n_pts == 1 ? 0.0 : T * static_cast<double>(k) / static_cast<double>(n_pts - 1);
    const auto [x, dx] = p.x_dx(t);
    const Point xd = p.x(t - cm.eval_r(x));
    const auto f = cm.evalX<double>(x, {cm.eps * xd[0], cm.eps * xd[1]});
    worst = std::max({worst, std::abs(dx[0] - f[0]), std::abs(dx[1] - f[1])});
  }
  return worst;
}

/// The cycle K(W0(theta)) sampled for nearest-point queries.
class CycleGeometry {
 public:
  static constexpr std::size_t kSamples = 1024;

  CycleGeometry(const Model& cm, const PlaneLoop& W0) : cm_(cm), w0_(W0) {
    require_cartesian(cm);
    d1_ = {differentiate(W0.comp1), differentiate(W0.comp2)};
    d2_ = {differentiate(W0.comp1, 2), differentiate(W0.comp2, 2)};
    for (std::size_t j = 0; j < kSamples; ++j) samples_.push_back(curve(static_cast<double>(j) / kSamples)[0]);
  }

  /// c, c', c'' at theta.
  std::array<Point, 3> curve(double theta) const {
    const Phases ph(theta, w0_.size());
    const double lift = w0_.lift ? 1.0 : 0.0;
    Series a(3), b(3);
    a[0] = w0_.comp1.eval(ph) + lift * theta;
    a[1] = d1_[0].eval(ph) + lift;
    a[2] = 0.5 * d2_[0].eval(ph);
    b[0] = w0_.comp2.eval(ph);
    b[1] = d1_[1].eval(ph);
    b[2] = 0.5 * d2_[1].eval(ph);
    const auto k = cm_.evalK(a, b);
    return {Point{k[0][0], k[1][0]}, Point{k[0][1], k[1][1]}, Point{2 * k[0][2], 2 * k[1][2]}};
  }

  /// Nearest cycle phase in [0, 1) and the distance to it.
  std::pair<double, double> nearest(const Point& x) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      const double d = std::hypot(samples_[j][0] - x[0], samples_[j][1] - x[1]);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    const double h = 1.0 / kSamples;
    const double th0 = static_cast<double>(best) * h;
    double th = th0;
    // Newton on (c - x) . c' = 0, kept inside the neighbouring sample cells
    for (int it = 0; it < 20; ++it) {
      const auto c = curve(th);
      const Point e{c[0][0] - x[0], c[0][1] - x[1]};
      const double g = e[0] * c[1][0] + e[1] * c[1][1];
      const double dg = c[1][0] * c[1][0] + c[1][1] * c[1][1] + e[0] * c[2][0] + e[1] * c[2][1];
      if (!(dg > 0.0)) break;
      const double step = g / dg;
      th = std::clamp(th - step, th0 - h, th0 + h);
      if (std::abs(step) < 1e-15) break;
    }
    const auto c = curve(th);
    return {th - std::floor(th), std::hypot(c[0][0] - x[0], c[0][1] - x[1])};
  }

 private:
  const Model& cm_;
  PlaneLoop w0_;
  std::array<PeriodicFn, 2> d1_, d2_;
  std::vector<Point> samples_;
};

/// Least squares by modified Gram-Schmidt; returns the coefficients.
inline std::vector<double> least_squares(std::vector<std::vector<double>> cols, std::vector<double> y) {
  const std::size_t p = cols.size();
  std::vector<std::vector<double>> R(p, std::vector<double>(p, 0.0));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      double d = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) d += cols[i][k] * cols[j][k];
      R[i][j] = d;
      for (std::size_t k = 0; k < y.size(); ++k) cols[j][k] -= d * cols[i][k];
    }
    double nrm = 0.0;
    for (double v : cols[j]) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0)) fail(ErrorKind::numerical, "rank-deficient least-squares fit");
    R[j][j] = nrm;
    for (double& v : cols[j]) v /= nrm;
  }
  std::vector<double> qy(p, 0.0), c(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < y.size(); ++k) qy[j] += cols[j][k] * y[k];
  for (std::size_t j = p; j-- > 0;) {
    double v = qy[j];
    for (std::size_t i = j + 1; i < p; ++i) v -= R[j][i] * c[i];
    c[j] = v / R[j][j];
  }
  return c;
}

/// Slope of log d(t) fitted together with harmonics of a phase phi(t):
///   log d = a + b t + sum_k (c_k cos 2 pi k phi + s_k sin 2 pi k phi).
/// The harmonics absorb the periodic modulation of the distance.
inline double log_slope_fit(const std::vector<double>& t, const std::vector<double>& logd,
                            const std::vector<double>& phi, int harmonics = 6) {
  std::vector<std::vector<double>> cols;
  cols.emplace_back(t.size(), 1.0);
  cols.push_back(t);
  for (int k = 1; k <= harmonics; ++k) {
    std::vector<double> c(t.size()), s(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      c[i] = std::cos(kTwoPi * k * phi[i]);
      s[i] = std::sin(kTwoPi * k * phi[i]);
    }
    cols.push_back(std::move(c));
    cols.push_back(std::move(s));
  }
  return least_squares(std::move(cols), logd)[1];
}

struct RateFit {
  double omega_hat = 0.0;
  double lambda_hat = 0.0;
  int crossings = 0;
  std::size_t fit_points = 0;
};

struct RateFitOptions {
  double phase_gate = 1e-6;   // crossings count once the distance is below this
  double fit_high = 1e-3;     // log-distance fit window
  double fit_low = 1e-8;      // above the O(dt^4) integration floor
  bool need_lambda = true;
};

/// omega from successive crossings of the section {nearest phase = 0};
/// lambda from the slope of log distance-to-cycle.
inline RateFit phase_rate_fit(const Trajectory& tr, const Model& cm, const Solution& sol,
                              const RateFitOptions& opt = {}) {
  const CycleGeometry geo(cm, sol.W.c[0]);
  std::vector<double> phase(tr.size()), dist(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) std::tie(phase[k], dist[k]) = geo.nearest(tr.x[k]);
  RateFit fit;
  // unwrap and record integer crossings
  std::vector<double> cross;
  double prev = phase[0], acc = phase[0];
  bool gated = dist[0] <= opt.phase_gate;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    double d = phase[k] - prev;
    d -= std::round(d);
    const double next = acc + d;
    if (gated && std::floor(next) > std::floor(acc)) {
      const double target = std::floor(next);
      cross.push_back(tr.t(k - 1) + tr.dt * (target - acc) / (next - acc));
    }
    acc = next;
    prev = phase[k];
    gated = gated || dist[k] <= opt.phase_gate;
  }
  if (cross.size() < 2) fail(ErrorKind::numerical, "too few section crossings to estimate omega");
  fit.crossings = static_cast<int>(cross.size());
  fit.omega_hat = static_cast<double>(cross.size() - 1) / (cross.back() - cross.front());

  if (opt.need_lambda) {
    std::vector<double> t, ld, ph;
    for (std::size_t k = 0; k < tr.size(); ++k)
      if (dist[k] <= opt.fit_high && dist[k] >= opt.fit_low) {
        t.push_back(tr.t(k));
        ld.push_back(std::log(dist[k]));
        ph.push_back(phase[k]);
      }
    if (t.size() < 50) fail(ErrorKind::numerical, "distance to the cycle underflows; lambda unavailable");
    fit.fit_points = t.size();
    fit.lambda_hat = log_slope_fit(t, ld, ph);
  }
  return fit;
}

/// ||E0|| + sum_j ||E^j|| |s|^j + ||E^>|| |s|^N from the stage reports.
inline double combined_residual(const Solution& sol, double s) {
  double total = 0.0;
  const double as = std::abs(s);
  for (const auto& r : sol.reports) {
    if (!std::isfinite(r.residual)) continue;
    if (r.stage == "zero") total += r.residual;
    else if (r.stage == "first") total += r.residual * as;
    else if (r.stage == "tail") total += r.residual * std::pow(as, static_cast<double>(sol.N()));
    else if (r.stage.rfind("order ", 0) == 0) total += r.residual * std::pow(as, std::stod(r.stage.substr(6)));
  }
  return total;
}

/// Per-stage residual, measured contraction, and the a-posteriori bound
/// mu/(1 - mu) d_last; plus the zero-order surrogate
///   (1 + (2 + 2 B0)/omega0) ||E0_1|| - ||E0_2|| / lambda0,
/// with B0 the measured C^1 size of the periodic part of W0.
inline json aposteriori_report(const Model& model, const Solution& sol, double noise_floor = 1e-13) {
  json stages = json::array();
  bool certifying = true;
  for (const auto& r : sol.reports) {
    const double mu = r.mu_hat(noise_floor);
    const bool ok = r.converged && mu < 1.0;
    certifying = certifying && ok;
    stages.push_back({{"stage", r.stage},
                      {"residual", detail::number_or_null(r.residual)},
                      {"mu_hat", detail::number_or_null(mu)},
                      {"d_last", detail::number_or_null(r.d_last())},
                      {"bound", detail::number_or_null(r.bound(noise_floor))},
                      {"certifying", ok}});
  }
  const PlaneLoop& W0 = sol.W.c[0];
  double B0 = 0.0;
  for (const PeriodicFn* f : {&W0.comp1, &W0.comp2})
    B0 = std::max(B0, f->sup_norm() + differentiate(*f).sup_norm());
  const auto E = residual_zero(model, sol.omega, W0).first;
  const double e1 = E.comp1.sup_norm(), e2 = E.comp2.sup_norm();
  const double surrogate = (1.0 + (2.0 + 2.0 * B0) / model.omega0) * e1 - e2 / model.lambda0;
  return {{"stages", stages},
          {"certifying", certifying},
          {"surrogate", {{"B0", B0}, {"E0_1", e1}, {"E0_2", e2}, {"value", surrogate}, {"label", "surrogate"}}}};
}

}  // namespace isochron

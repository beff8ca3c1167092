#pragma once

// Frequency and limit-cycle correction (omega, W0) as the fixed point of the
// zero-order operator, iterated by plain Picard steps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isochron/error.hpp"
#include "isochron/jet.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"

namespace isochron {

struct QuadConfig {
  int panels = 8;
  int nodes_per_panel = 16;
  double tail_tol = 1e-14;
  double qtol = 1e-12;
};

struct SolverConfig {
  std::size_t modes = 64;
  std::size_t order = 3;
  double tol = 1e-11;
  int max_iter = 200;
  std::size_t n_cheb = 32;
  QuadConfig quad;
  bool assume_interior = true;
  bool dealias = true;
  double normalization = 1.0;   // target value of the mean of W1_2
  double noise_floor = 1e-13;   // distances below this are excluded from ratio estimates
  std::optional<double> a1, a2;

  void validate() const {
    if (modes < 8 || !is_power_of_two(modes))
      fail(ErrorKind::invalid_input, "modes must be a power of two >= 8");
    if (order < 2) fail(ErrorKind::invalid_input, "order must be at least 2");
    if (!(tol > 0.0)) fail(ErrorKind::invalid_input, "tol must be positive");
    if (max_iter < 1) fail(ErrorKind::invalid_input, "max_iter must be at least 1");
    if (n_cheb < 4) fail(ErrorKind::invalid_input, "cheb must be at least 4");
    if (!(normalization != 0.0)) fail(ErrorKind::invalid_input, "normalization must be nonzero");
  }

  /// The model with cut-off overrides applied.
  Model apply(Model m) const {
    if (a1) m.cutoff.a1 = *a1;
    if (a2) m.cutoff.a2 = *a2;
    m.validate();
    return m;
  }
};

struct SolveReport {
  std::string stage;
  int iterations = 0;
  std::vector<double> distances;  // d_k = d(x_k, x_{k+1})
  std::vector<double> ratios;     // d_k / d_{k-1}
  double residual = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string message;

  void push(double d) {
    if (!distances.empty()) ratios.push_back(distances.back() > 0.0 ? d / distances.back() : 0.0);
    distances.push_back(d);
  }

  /// Largest ratio whose denominator is above the noise floor.
  double mu_hat(double floor) const {
    double mu = 0.0;
    for (std::size_t k = 0; k < ratios.size(); ++k)
      if (distances[k] > floor) mu = std::max(mu, ratios[k]);
    return mu;
  }

  double d_last() const { return distances.empty() ? 0.0 : distances.back(); }

  /// mu/(1 - mu) d_last, or infinity when mu >= 1.
  double bound(double floor) const {
    const double mu = mu_hat(floor);
    if (mu >= 1.0) return std::numeric_limits<double>::infinity();
    return mu / (1.0 - mu) * d_last();
  }

  /// True if the last five distances grew strictly.
  bool diverging() const {
    if (distances.size() < 6) return false;
    for (std::size_t k = distances.size() - 5; k < distances.size(); ++k)
      if (!(distances[k] > distances[k - 1])) return false;
    return true;
  }
};

struct ZeroIterate {
  double a = 1.0;
  PlaneLoop Z;  // Z.comp1 is the periodic part of a lift with Z1(0) = 0
};

inline bool interior(const Model& m, const PlaneLoop& w0, bool assume) {
  return assume && w0.comp2.sup_norm() < m.cutoff.a1;
}

inline double iterate_distance(const ZeroIterate& x, const ZeroIterate& y) {
  return std::abs(x.a - y.a) + c0_distance(x.Z, y.Z);
}

inline ZeroIterate gamma0_apply(const Model& model, const ZeroIterate& it, bool dealias = true,
                                bool assume_interior = true) {
  const FTSeries W{{it.Z}};
  FTSeries g = rhs_jet(model, W, it.a, model.lambda0, interior(model, it.Z, assume_interior));
  PeriodicFn g1 = g.c[0].comp1, g2 = g.c[0].comp2;
  if (dealias) {
    g1 = g1.dealiased();
    g2 = g2.dealiased();
  }
  ZeroIterate out;
  out.a = model.omega0 + g1.mean();
  if (!(std::abs(out.a - model.omega0) <= 0.5 * model.omega0))
    fail(ErrorKind::domain, "frequency iterate " + std::to_string(out.a) +
                                " left |a - omega0| <= omega0/2");
  const PeriodicFn G1 = antiderivative_zero_mean(g1).second;
  out.Z.comp1 = (1.0 / out.a) * G1;
  out.Z.comp2 = spectral_solve(g2, it.a, -model.lambda0);
  out.Z.lift = true;
  return out;
}

struct ZeroSolution {
  double omega = 0.0;
  PlaneLoop W0;
  SolveReport report;
};

/// E0 = omega W0' - (omega0, lambda0 W0_2) - eps Ybar(W0, W0~) on a doubled grid.
inline std::pair<PlaneLoop, double> residual_zero(const Model& model, double omega,
                                                  const PlaneLoop& W0) {
  const PlaneLoop w = W0.resample(2 * W0.size());
  const FTSeries g = rhs_jet(model, FTSeries{{w}}, omega, model.lambda0);
  const PeriodicFn d1 = differentiate(w.comp1), d2 = differentiate(w.comp2);
  const std::size_t n = w.size();
  std::vector<double> e1(n), e2(n);
  for (std::size_t m = 0; m < n; ++m) {
    e1[m] = omega * (1.0 + d1[m]) - model.omega0 - g.c[0].comp1[m];
    e2[m] = omega * d2[m] - model.lambda0 * w.comp2[m] - g.c[0].comp2[m];
  }
  PlaneLoop E{PeriodicFn::from_values(std::move(e1)), PeriodicFn::from_values(std::move(e2)), false};
  const double norm = std::max(E.comp1.sup_norm(), E.comp2.sup_norm());
  return {std::move(E), norm};
}

inline ZeroSolution solve_zero(const Model& model, const SolverConfig& cfg,
                               std::optional<ZeroIterate> guess = std::nullopt) {
  cfg.validate();
  ZeroIterate x = guess ? *guess : ZeroIterate{model.omega0, PlaneLoop::identity(cfg.modes)};
  if (x.Z.size() != cfg.modes) x.Z = x.Z.resample(cfg.modes);
  ZeroSolution sol;
  sol.report.stage = "zero";
  for (int k = 0; k < cfg.max_iter; ++k) {
    ZeroIterate next;
    try {
      next = gamma0_apply(model, x, cfg.dealias, cfg.assume_interior);
    } catch (const Error& e) {
      sol.report.message = e.what();
      break;
    }
    const double d = iterate_distance(x, next);
    sol.report.push(d);
    sol.report.iterations = k + 1;
    x = std::move(next);
    if (d < cfg.tol) {
      sol.report.converged = true;
      break;
    }
    if (sol.report.diverging()) {
      sol.report.message = "distance grew for 5 consecutive steps";
      break;
    }
  }
  if (!sol.report.converged && sol.report.message.empty())
    sol.report.message = "max_iter reached";
  sol.omega = x.a;
  sol.W0 = x.Z;
  sol.report.residual = residual_zero(model, sol.omega, sol.W0).second;
  return sol;
}

}  // namespace isochron

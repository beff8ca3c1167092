#pragma once

// First-order data (lambda, W1) under the mean normalization of W1_2, and
// the higher coefficients W^j, j >= 2, of the slow-manifold jet.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "isochron/dual.hpp"
#include "isochron/error.hpp"
#include "isochron/jet.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/solver_zero.hpp"

namespace isochron {

using Mat2 = std::array<std::array<PeriodicFn, 2>, 2>;

/// Linearization of eps Ybar(W, W~) around W0:
///   g = A F + B(lambda) F(theta + delta0),  B(lambda) = exp(-lambda rho0) D2.
struct ABPair {
  Mat2 A;
  Mat2 D2;
  PeriodicFn rho0;
  PeriodicFn delta0;

  Mat2 B(double lambda) const {
    const std::size_t n = rho0.size();
    std::vector<double> f(n);
    for (std::size_t m = 0; m < n; ++m) f[m] = std::exp(-lambda * rho0[m]);
    const PeriodicFn e = PeriodicFn::from_values(std::move(f));
    return {{{e * D2[0][0], e * D2[0][1]}, {e * D2[1][0], e * D2[1][1]}}};
  }
};

inline ABPair assemble_AB(const Model& model, double omega, const PlaneLoop& W0) {
  using D4 = Dual<double, 4>;
  using D2 = Dual<double, 2>;
  const std::size_t n = W0.size();
  const PeriodicFn dp = differentiate(W0.comp1), dw2 = differentiate(W0.comp2);
  std::array<std::array<std::vector<double>, 2>, 2> a, d2;
  for (auto& row : a)
    for (auto& v : row) v.assign(n, 0.0);
  for (auto& row : d2)
    for (auto& v : row) v.assign(n, 0.0);
  std::vector<double> rho0(n), delta0(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double u1 = W0.node_value(0, m), u2 = W0.node_value(1, m);
    const D2 r = model.rho_bar(D2::seed(u1, 0), D2::seed(u2, 1));
    rho0[m] = r.v;
    delta0[m] = -omega * r.v;
    const double x = PeriodicFn::node(m, n) + delta0[m];
    const Phases ph(x, n);
    const double v1 = x + W0.comp1.eval(ph), v2 = W0.comp2.eval(ph);
    const std::array<double, 2> dw{1.0 + dp.eval(ph), dw2.eval(ph)};

    const D4 U1 = D4::seed(u1, 0), U2 = D4::seed(u2, 1), V1 = D4::seed(v1, 2), V2 = D4::seed(v2, 3);
    const D4 weight = model.cutoff.phi(U2) * model.cutoff.phi(V2);
    if (weight.v == 0.0) continue;
    const auto y = model.evalY(U1, U2, V1, V2);
    for (int i = 0; i < 2; ++i) {
      const D4 yb = y[i] * weight;
      for (int k = 0; k < 2; ++k) {
        d2[i][k][m] = model.eps * yb.d[2 + k];
        a[i][k][m] = model.eps * yb.d[k];
      }
      const double d2w = model.eps * (yb.d[2] * dw[0] + yb.d[3] * dw[1]);
      for (int k = 0; k < 2; ++k) a[i][k][m] -= omega * d2w * r.d[k];
    }
  }
  ABPair ab;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      ab.A[i][k] = PeriodicFn::from_values(a[i][k]);
      ab.D2[i][k] = PeriodicFn::from_values(d2[i][k]);
    }
  ab.rho0 = PeriodicFn::from_values(std::move(rho0));
  ab.delta0 = PeriodicFn::from_values(std::move(delta0));
  return ab;
}

/// g = A F + B(b) F(theta + delta0); already carries the factor eps.
inline std::array<PeriodicFn, 2> apply_AB(const ABPair& ab, double b, const PlaneLoop& F) {
  const Mat2 B = ab.B(b);
  const std::array<PeriodicFn, 2> Fs{compose_shift(F.comp1, ab.delta0),
                                     compose_shift(F.comp2, ab.delta0)};
  std::array<PeriodicFn, 2> g;
  for (int i = 0; i < 2; ++i)
    g[i] = ab.A[i][0] * F.comp1 + ab.A[i][1] * F.comp2 + B[i][0] * Fs[0] + B[i][1] * Fs[1];
  return g;
}

struct FirstIterate {
  double b = -1.0;
  PlaneLoop F;
};

inline FirstIterate gamma1_apply(const Model& model, double omega, const ABPair& ab,
                                 const FirstIterate& it, double target = 1.0,
                                 bool dealias = true) {
  auto g = apply_AB(ab, it.b, it.F);
  if (dealias)
    for (auto& x : g) x = x.dealiased();
  const double rate = g[1].mean() / target;
  FirstIterate out;
  out.b = model.lambda0 + rate;
  if (!(std::abs(out.b - model.lambda0) <= std::abs(model.lambda0) / 3.0))
    fail(ErrorKind::domain, "exponent iterate " + std::to_string(out.b) +
                                " left |b - lambda0| <= |lambda0|/3");
  out.F.lift = false;
  out.F.comp1 = spectral_solve(g[0], omega, it.b);
  const PeriodicFn h = (1.0 / omega) * (g[1] - rate * it.F.comp2);
  const PeriodicFn H = antiderivative_zero_mean(h).second;
  out.F.comp2 = H + (target - H.mean());
  return out;
}

struct FirstSolution {
  double lambda = 0.0;
  PlaneLoop W1;
  SolveReport report;
};

/// E^j = omega W^j' + j lambda W^j - (0, lambda0 W^j_2) - [s^j coefficient of eps Ybar],
/// on a doubled grid; `jet` must hold orders 0..j.
inline std::pair<PlaneLoop, double> residual_order(const Model& model, double omega, double lambda,
                                                   const FTSeries& jet, std::size_t j) {
  if (jet.order() <= j) fail(ErrorKind::invalid_input, "residual_order: jet too short");
  FTSeries w;
  for (std::size_t i = 0; i <= j; ++i) w.c.push_back(jet.c[i].resample(2 * jet.size()));
  const FTSeries S = rhs_jet(model, w, omega, lambda);
  const PlaneLoop& Wj = w.c[j];
  const PeriodicFn d1 = differentiate(Wj.comp1), d2 = differentiate(Wj.comp2);
  const double jl = static_cast<double>(j) * lambda;
  const std::size_t n = w.size();
  std::vector<double> e1(n), e2(n);
  for (std::size_t m = 0; m < n; ++m) {
    e1[m] = omega * d1[m] + jl * Wj.comp1[m] - S.c[j].comp1[m];
    e2[m] = omega * d2[m] + (jl - model.lambda0) * Wj.comp2[m] - S.c[j].comp2[m];
  }
  PlaneLoop E{PeriodicFn::from_values(std::move(e1)), PeriodicFn::from_values(std::move(e2)), false};
  const double norm = std::max(E.comp1.sup_norm(), E.comp2.sup_norm());
  return {std::move(E), norm};
}

inline FirstSolution solve_first(const Model& model, double omega, const PlaneLoop& W0,
                                 const SolverConfig& cfg,
                                 std::optional<FirstIterate> guess = std::nullopt) {
  cfg.validate();
  const std::size_t n = W0.size();
  FirstIterate x = guess ? *guess
                         : FirstIterate{model.lambda0,
                                        PlaneLoop::constant(n, 0.0, cfg.normalization)};
  if (x.F.size() != n) x.F = x.F.resample(n);
  const ABPair ab = assemble_AB(model, omega, W0);
  FirstSolution sol;
  sol.report.stage = "first";
  for (int k = 0; k < cfg.max_iter; ++k) {
    FirstIterate next;
    try {
      next = gamma1_apply(model, omega, ab, x, cfg.normalization, cfg.dealias);
    } catch (const Error& e) {
      sol.report.message = e.what();
      break;
    }
    const double d = std::abs(next.b - x.b) + c0_distance(next.F, x.F);
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
  sol.lambda = x.b;
  sol.W1 = x.F;
  FTSeries jet{{W0, sol.W1}};
  sol.report.residual = residual_order(model, omega, sol.lambda, jet, 1).second;
  return sol;
}

/// Solves for W^j given orders 0..j-1. The coefficient of s^j in eps Ybar is
/// affine in W^j; it is re-extracted from the full jet each sweep, so the
/// linear part includes both the local and the delayed-argument terms.
inline std::pair<PlaneLoop, SolveReport> solve_order_j(const Model& model, double omega,
                                                       double lambda, const FTSeries& jet,
                                                       std::size_t j, const SolverConfig& cfg) {
  if (j < 2 || jet.order() < j)
    fail(ErrorKind::invalid_input, "solve_order_j needs j >= 2 and orders 0..j-1");
  const double jl = static_cast<double>(j) * lambda;
  if (std::abs(jl - model.lambda0) < 1e-10)
    fail(ErrorKind::numerical, "degenerate spectrum: j lambda = lambda0");
  const std::size_t n = jet.size();
  FTSeries w;
  for (std::size_t i = 0; i < j; ++i) w.c.push_back(jet.c[i]);
  w.c.push_back(PlaneLoop::constant(n, 0.0, 0.0));
  const bool inside = interior(model, jet.c[0], cfg.assume_interior);
  SolveReport rep;
  rep.stage = "order " + std::to_string(j);
  for (int k = 0; k < cfg.max_iter; ++k) {
    const FTSeries S = rhs_jet(model, w, omega, lambda, inside);
    PeriodicFn s1 = S.c[j].comp1, s2 = S.c[j].comp2;
    if (cfg.dealias) {
      s1 = s1.dealiased();
      s2 = s2.dealiased();
    }
    PlaneLoop next{spectral_solve(s1, omega, jl), spectral_solve(s2, omega, jl - model.lambda0), false};
    const double d = c0_distance(next, w.c[j]);
    rep.push(d);
    rep.iterations = k + 1;
    w.c[j] = std::move(next);
    if (d < cfg.tol) {
      rep.converged = true;
      break;
    }
    if (rep.diverging()) {
      rep.message = "distance grew for 5 consecutive steps";
      break;
    }
  }
  if (!rep.converged && rep.message.empty()) rep.message = "max_iter reached";
  rep.residual = residual_order(model, omega, lambda, w, j).second;
  return {w.c[j], rep};
}

}  // namespace isochron

#pragma once

// The order->=N remainder W^>(theta, s) = s^N V(theta, s) on a Fourier x
// Chebyshev-Lobatto grid, computed by quadrature along the characteristics
// (theta + omega t, s e^{lambda t}) of the linearized flow.
//
// Near s = 0 the source Y^> is a difference of nearly equal numbers. Below
// |s| = sigma_c it is taken instead from a longer jet whose extra orders solve
// the same homological equations, so the subtraction is never formed there.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "isochron/cutoff.hpp"
#include "isochron/error.hpp"
#include "isochron/jet.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/quadrature.hpp"
#include "isochron/solver_variational.hpp"
#include "isochron/solver_zero.hpp"

namespace isochron {

inline std::vector<double> chebyshev_lobatto(std::size_t n, double half_width) {
  std::vector<double> s(n);
  for (std::size_t l = 0; l < n; ++l)
    s[l] = half_width * std::cos(std::numbers::pi * static_cast<double>(l) / static_cast<double>(n - 1));
  // exact symmetry, and an exact zero for odd n
  for (std::size_t l = 0; l < n / 2; ++l) s[n - 1 - l] = -s[l];
  if (n % 2) s[n / 2] = 0.0;
  return s;
}

/// Chebyshev-Lobatto differentiation matrix for the nodes above (row-major).
inline std::vector<double> chebyshev_diff_matrix(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 1.0), D(n * n, 0.0);
  c[0] = c[n - 1] = 2.0;
  for (std::size_t i = 0; i < n; ++i)
    if (i % 2) c[i] = -c[i];
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      D[i * n + j] = (c[i] / c[j]) / (x[i] - x[j]);
      row += D[i * n + j];
    }
    D[i * n + i] = -row;  // negative sum trick
  }
  return D;
}

/// Barycentric weights for Chebyshev-Lobatto nodes: (-1)^l, halved at both ends.
inline std::vector<double> barycentric_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t l = 0; l < n; ++l) w[l] = (l % 2 ? -1.0 : 1.0) * (l == 0 || l + 1 == n ? 0.5 : 1.0);
  return w;
}

/// Coefficients c_l with p(s) = sum_l c_l f_l for the interpolant through (x_l, f_l).
inline void barycentric_row(const std::vector<double>& x, const std::vector<double>& w, double s,
                            std::vector<double>& row) {
  row.assign(x.size(), 0.0);
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (s == x[l]) {
      row[l] = 1.0;
      return;
    }
  }
  double den = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) {
    row[l] = w[l] / (s - x[l]);
    den += row[l];
  }
  for (double& r : row) r /= den;
}

struct TailFn {
  std::size_t N = 3;
  double S_max = 1.0;
  std::size_t n_theta = 0;
  std::size_t n_cheb = 0;
  std::array<std::vector<double>, 2> V;  // V[i][m * n_cheb + l]

  static TailFn zero(std::size_t N, double S_max, std::size_t n_theta, std::size_t n_cheb) {
    TailFn t{N, S_max, n_theta, n_cheb, {}};
    t.V[0].assign(n_theta * n_cheb, 0.0);
    t.V[1].assign(n_theta * n_cheb, 0.0);
    return t;
  }
  std::vector<double> s_nodes() const { return chebyshev_lobatto(n_cheb, S_max); }
  double& at(int i, std::size_t m, std::size_t l) { return V[i][m * n_cheb + l]; }
  double at(int i, std::size_t m, std::size_t l) const { return V[i][m * n_cheb + l]; }

  double sup_norm() const {
    double s = 0.0;
    for (const auto& v : V)
      for (double x : v) s = std::max(s, std::abs(x));
    return s;
  }
};

/// Weighted distance ||W^> - G^>||_{0,N} = sup |V - U| over the grid.
inline double tail_distance(const TailFn& a, const TailFn& b) {
  double d = 0.0;
  for (int i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < a.V[i].size(); ++k) d = std::max(d, std::abs(a.V[i][k] - b.V[i][k]));
  return d;
}

/// Evaluates W = jet + s^N V at arbitrary (theta, s); Fourier in theta per
/// Chebyshev column, then barycentric in s.
class TailField {
 public:
  TailField(const FTSeries& jet, const TailFn& tail) : jet_(jet), tail_(tail) {
    if (jet.order() != tail.N) fail(ErrorKind::invalid_input, "tail order does not match the jet");
    if (jet.size() != tail.n_theta) fail(ErrorKind::invalid_input, "tail grid does not match the jet");
    nodes_ = tail.s_nodes();
    weights_ = barycentric_weights(nodes_.size());
    for (int i = 0; i < 2; ++i) {
      cols_[i].resize(tail.n_cheb);
      for (std::size_t l = 0; l < tail.n_cheb; ++l) {
        std::vector<double> v(tail.n_theta);
        for (std::size_t m = 0; m < tail.n_theta; ++m) v[m] = tail.at(i, m, l);
        cols_[i][l] = PeriodicFn::from_values(std::move(v));
      }
    }
  }

  std::size_t n() const { return tail_.n_theta; }
  double s_max() const { return tail_.S_max; }
  const FTSeries& jet() const { return jet_; }

  /// V(theta, s) for both components.
  std::array<double, 2> V(const Phases& ph, double s) const {
    if (std::abs(s) > tail_.S_max * (1.0 + 1e-14))
      fail(ErrorKind::domain, "tail evaluation at |s| = " + std::to_string(std::abs(s)) +
                                  " beyond S_max = " + std::to_string(tail_.S_max));
    thread_local std::vector<double> row;
    barycentric_row(nodes_, weights_, s, row);
    std::array<double, 2> out{0.0, 0.0};
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (row[l] == 0.0) continue;
      out[0] += row[l] * cols_[0][l].eval(ph);
      out[1] += row[l] * cols_[1][l].eval(ph);
    }
    return out;
  }

  /// W(theta, s); the lift contributes theta itself.
  std::array<double, 2> W(double theta, double s) const {
    const Phases ph(theta, n());
    return W(theta, ph, s);
  }

  std::array<double, 2> W(double theta, const Phases& ph, double s) const {
    std::array<double, 2> w{0.0, 0.0};
    for (std::size_t j = jet_.order(); j-- > 0;) {
      w[0] = w[0] * s + jet_.c[j].comp1.eval(ph);
      w[1] = w[1] * s + jet_.c[j].comp2.eval(ph);
    }
    if (jet_.c[0].lift) w[0] += theta;
    const auto v = V(ph, s);
    const double sN = std::pow(s, static_cast<double>(tail_.N));
    return {w[0] + sN * v[0], w[1] + sN * v[1]};
  }

  /// {W, W_theta, W_s} at (theta, s).
  std::array<std::array<double, 2>, 3> W_d(double theta, double s) const {
    build_derivatives();
    if (std::abs(s) > tail_.S_max * (1.0 + 1e-14))
      fail(ErrorKind::domain, "tail evaluation at |s| = " + std::to_string(std::abs(s)) +
                                  " beyond S_max = " + std::to_string(tail_.S_max));
    const Phases ph(theta, n());
    std::vector<double> row;
    barycentric_row(nodes_, weights_, s, row);
    std::array<std::array<double, 2>, 3> out{};
    std::array<double, 2> v{0.0, 0.0}, vt{0.0, 0.0}, vs{0.0, 0.0};
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (row[l] == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        v[c] += row[l] * cols_[c][l].eval(ph);
        vt[c] += row[l] * dth_[c][l].eval(ph);
        vs[c] += row[l] * ds_[c][l].eval(ph);
      }
    }
    const double Nd = static_cast<double>(tail_.N);
    const double sN = std::pow(s, Nd);
    const double sN1 = tail_.N > 0 ? std::pow(s, Nd - 1.0) : 0.0;
    for (int c = 0; c < 2; ++c) {
      double w = 0.0, wt = 0.0, ws = 0.0;
      for (std::size_t j = jet_.order(); j-- > 0;) {
        w = w * s + jet_.c[j].comp(c).eval(ph);
        wt = wt * s + jet_dth_[j][c].eval(ph);
        if (j > 0) ws = ws * s + static_cast<double>(j) * jet_.c[j].comp(c).eval(ph);
      }
      out[0][c] = w + sN * v[c];
      out[1][c] = wt + sN * vt[c];
      out[2][c] = ws + Nd * sN1 * v[c] + sN * vs[c];
    }
    if (jet_.c[0].lift) {
      out[0][0] += theta;
      out[1][0] += 1.0;
    }
    return out;
  }

 private:
  void build_derivatives() const {
    if (!jet_dth_.empty()) return;
    const std::size_t nc = tail_.n_cheb, nt = tail_.n_theta;
    const auto D = chebyshev_diff_matrix(nodes_);
    for (int c = 0; c < 2; ++c) {
      dth_[c].resize(nc);
      ds_[c].resize(nc);
      for (std::size_t l = 0; l < nc; ++l) {
        dth_[c][l] = differentiate(cols_[c][l]);
        std::vector<double> d(nt, 0.0);
        for (std::size_t i = 0; i < nt; ++i)
          for (std::size_t k = 0; k < nc; ++k) d[i] += D[l * nc + k] * tail_.at(c, i, k);
        ds_[c][l] = PeriodicFn::from_values(std::move(d));
      }
    }
    for (const auto& w : jet_.c) jet_dth_.push_back({differentiate(w.comp1), differentiate(w.comp2)});
  }

  const FTSeries& jet_;
  const TailFn& tail_;
  std::vector<double> nodes_, weights_;
  std::array<std::vector<PeriodicFn>, 2> cols_;
  mutable std::array<std::vector<PeriodicFn>, 2> dth_, ds_;
  mutable std::vector<std::array<PeriodicFn, 2>> jet_dth_;
};

inline std::array<double, 2> tail_eval(const FTSeries& jet, const TailFn& tail, double theta, double s) {
  return TailField(jet, tail).W(theta, s);
}

/// s-domain half-width covering every delayed argument with nonzero weight.
inline double tail_s_max(const Model& m) {
  return m.cutoff.a2 * std::exp(4.0 / 3.0 * std::abs(m.lambda0) * m.h) * 1.05;
}

/// Everything the tail operator needs that does not change between sweeps.
struct TailProblem {
  const Model* model = nullptr;
  FTSeries jet;      // orders 0..N-1
  FTSeries ext;      // orders 0..N_ext-1, extra orders from the homological equations
  FTSeries source;   // s-coefficients of eps Ybar along ext
  double omega = 0.0, lambda = 0.0;
  double sigma_c = 0.04;
  std::size_t N = 3;
  bool dealias = true;
  mutable int panels = 0;  // refinement level found by the previous sweep

  /// Optional replacement of the whole cut-off source eps Y^> phi(s) (test hook);
  /// arguments theta, s. It is integrated over all of |s| <= S_max.
  std::function<std::array<double, 2>(double, double)> source_override;
};

inline TailProblem make_tail_problem(const Model& model, const FTSeries& jet, double omega,
                                     double lambda, const SolverConfig& cfg,
                                     std::size_t extra_orders = 9) {
  TailProblem p;
  p.model = &model;
  p.jet = jet;
  p.omega = omega;
  p.lambda = lambda;
  p.N = jet.order();
  p.sigma_c = std::min(0.04, 0.5 * model.cutoff.a1);
  p.dealias = cfg.dealias;
  p.ext = jet;
  SolverConfig c = cfg;
  c.tol = std::min(cfg.tol, 1e-13);
  c.max_iter = std::max(cfg.max_iter, 50);
  for (std::size_t j = p.N; j < p.N + extra_orders; ++j) {
    auto [wj, rep] = solve_order_j(model, omega, lambda, p.ext, j, c);
    p.ext.c.push_back(std::move(wj));
  }
  p.source = rhs_jet(model, p.ext, omega, lambda);
  return p;
}

namespace detail {

/// eps Ybar(W, W~) minus the jet polynomial `poly`, with W~ obtained from `W_at`.
template <class WFn>
std::array<double, 2> full_source(const TailProblem& p, double theta, double s,
                                  const std::array<double, 2>& w, const std::array<double, 2>& poly,
                                  double s_max, const WFn& W_at) {
  const Model& m = *p.model;
  double f0 = 0.0, f1 = 0.0;
  const double pu = m.cutoff.phi(w[1]);
  if (pu != 0.0) {
    const double rho = m.rho_bar(w[0], w[1]);
    const double th2 = theta - p.omega * rho;
    const double s2 = s * std::exp(-p.lambda * rho);
    if (std::abs(s2) > s_max)
      fail(ErrorKind::domain, "delayed argument beyond the tail domain with nonzero weight");
    const auto wt = W_at(th2, s2);
    const double weight = pu * m.cutoff.phi(wt[1]);
    if (weight != 0.0) {
      const auto y = m.evalY(w[0], w[1], wt[0], wt[1]);
      f0 = m.eps * y[0] * weight;
      f1 = m.eps * y[1] * weight;
    }
  }
  return {f0 - poly[0], f1 - poly[1]};
}

template <class Eval>
std::array<double, 2> horner2(const FTSeries& f, std::size_t lo, std::size_t hi, double s,
                              const Eval& ev) {
  std::array<double, 2> y{0.0, 0.0};
  for (std::size_t j = hi; j-- > lo;) {
    y[0] = y[0] * s + ev(f.c[j].comp1);
    y[1] = y[1] * s + ev(f.c[j].comp2);
  }
  return y;
}

/// Interpolation in s for points off the grid inside the operator, where W^>
/// enters only through the O(eps) coupling. Small grids use the global
/// barycentric interpolant; large ones a local stencil of the nearest columns,
/// whose switching jumps are then far below round-off of the coupling.
class TailSampler {
 public:
  static constexpr std::size_t kGlobalLimit = 128;
  static constexpr std::size_t kStencil = 24;

  TailSampler(const FTSeries& jet, const TailFn& tail)
      : jet_(jet), tail_(tail), m_(tail.n_cheb <= kGlobalLimit ? tail.n_cheb : kStencil) {
    nodes_ = tail.s_nodes();
    bary_ = barycentric_weights(nodes_.size());
    for (int c = 0; c < 2; ++c) {
      cols_[c].resize(tail.n_cheb);
      for (std::size_t l = 0; l < tail.n_cheb; ++l) {
        std::vector<double> v(tail.n_theta);
        for (std::size_t i = 0; i < tail.n_theta; ++i) v[i] = tail.at(c, i, l);
        cols_[c][l] = PeriodicFn::from_values(std::move(v));
      }
    }
  }

  std::size_t n() const { return tail_.n_theta; }
  double s_max() const { return tail_.S_max; }

  /// W at grid angle theta_i.
  std::array<double, 2> W_node(std::size_t i, double s) const {
    std::size_t first;
    thread_local std::vector<double> w;
    stencil(s, first, w);
    std::array<double, 2> v{0.0, 0.0};
    for (std::size_t j = 0; j < m_; ++j)
      for (int c = 0; c < 2; ++c) v[c] += w[j] * tail_.at(c, i, first + j);
    auto y = horner2(jet_, 0, jet_.order(), s, [&](const PeriodicFn& f) { return f[i]; });
    if (jet_.c[0].lift) y[0] += PeriodicFn::node(i, n());
    const double sN = std::pow(s, static_cast<double>(tail_.N));
    return {y[0] + sN * v[0], y[1] + sN * v[1]};
  }

  std::array<double, 2> W(double theta, double s) const {
    std::size_t first;
    thread_local std::vector<double> w;
    stencil(s, first, w);
    const Phases ph(theta, n());
    std::array<double, 2> v{0.0, 0.0};
    for (std::size_t j = 0; j < m_; ++j)
      for (int c = 0; c < 2; ++c) v[c] += w[j] * cols_[c][first + j].eval(ph);
    auto y = horner2(jet_, 0, jet_.order(), s, [&](const PeriodicFn& f) { return f.eval(ph); });
    if (jet_.c[0].lift) y[0] += theta;
    const double sN = std::pow(s, static_cast<double>(tail_.N));
    return {y[0] + sN * v[0], y[1] + sN * v[1]};
  }

 private:
  void stencil(double s, std::size_t& first, std::vector<double>& w) const {
    const std::size_t nc = tail_.n_cheb;
    if (std::abs(s) > tail_.S_max * (1.0 + 1e-14))
      fail(ErrorKind::domain, "tail evaluation at |s| = " + std::to_string(std::abs(s)) +
                                  " beyond S_max = " + std::to_string(tail_.S_max));
    if (m_ == nc) {
      first = 0;
      barycentric_row(nodes_, bary_, s, w);
      return;
    }
    w.resize(m_);
    const double pos = std::acos(std::clamp(s / tail_.S_max, -1.0, 1.0)) *
                       static_cast<double>(nc - 1) / std::numbers::pi;
    const long centre = std::lround(pos) - static_cast<long>(m_ / 2);
    first = static_cast<std::size_t>(std::clamp(centre, 0L, static_cast<long>(nc - m_)));
    for (std::size_t j = 0; j < m_; ++j) {
      double p = 1.0;
      const double xj = nodes_[first + j];
      for (std::size_t k = 0; k < m_; ++k)
        if (k != j) p *= (s - nodes_[first + k]) / (xj - nodes_[first + k]);
      w[j] = p;
    }
  }

  const FTSeries& jet_;
  const TailFn& tail_;
  std::size_t m_;
  std::vector<double> nodes_, bary_;
  std::array<std::vector<PeriodicFn>, 2> cols_;
};

/// Weights p_q with int_{-1}^{y} f ~ sum_q p_q f(x_q), exact for polynomials of
/// degree < n on the Gauss nodes x_q.
inline std::vector<double> partial_gauss_weights(const GaussLegendre& g, double y) {
  const std::size_t n = g.x.size();
  std::vector<double> Py(n + 1);
  Py[0] = 1.0;
  if (n >= 1) Py[1] = y;
  for (std::size_t k = 1; k < n; ++k)
    Py[k + 1] = ((2.0 * k + 1.0) * y * Py[k] - k * Py[k - 1]) / (k + 1.0);
  std::vector<double> p(n);
  for (std::size_t q = 0; q < n; ++q) {
    double pm1 = 1.0, pm = g.x[q];
    double sum = 0.5 * (y + 1.0);
    for (std::size_t k = 1; k < n; ++k) {
      sum += 0.5 * pm * (Py[k + 1] - Py[k - 1]);
      const double next = ((2.0 * k + 1.0) * g.x[q] * pm - k * pm1) / (k + 1.0);
      pm1 = pm;
      pm = next;
    }
    p[q] = g.w[q] * sum;
  }
  return p;
}

/// (e^{g b} - e^{g a}) / g.
inline cplx exp_integral(cplx g, double a, double b) {
  if (std::abs(g) * (b - a) < 1e-8) return (b - a) * (1.0 + 0.5 * g * (a + b));
  return (std::exp(g * b) - std::exp(g * a)) / g;
}

/// One sweep with `panels` Gauss panels per region of u = ln|sigma|.
///
/// With sigma = s e^{lambda t}, the quadrature in t for node s is the same rule
/// in u shifted by ln|s|, and theta + omega t becomes a phase per Fourier mode:
///   H'_k(s) = -int_0^{T} e^{beta_k t} F_k(s e^{lambda t}) dt,
///   beta_k = 2 pi i k omega - lambda0 delta_{c,2}.
/// All nodes share one set of source evaluations; each node integrates the
/// cumulative rule up to ln|s|, the last panel by exact partial weights.
/// Below sigma_c the source is the extended jet and is integrated in closed form.
inline TailFn tail_sweep(const TailProblem& p, const TailFn& H, const TailSampler& smp,
                         int panels, int nq, double T_max) {
  const Model& m = *p.model;
  const std::size_t n = H.n_theta, half = n / 2;
  const double lam = p.lambda;
  const bool taylor = !p.source_override;
  const auto& g = gauss_legendre(nq);
  TailFn out = TailFn::zero(H.N, H.S_max, n, H.n_cheb);
  const auto s_nodes = H.s_nodes();
  const double Nd = static_cast<double>(p.N);

  // regions in u; with a synthetic source there is no Taylor part, so integrate to T_max
  std::vector<double> cuts;
  if (!taylor) cuts.push_back(std::log(H.S_max) + lam * T_max);
  cuts.push_back(std::log(p.sigma_c));
  cuts.push_back(std::log(m.cutoff.a1));
  cuts.push_back(std::log(m.cutoff.a2));
  if (!taylor && H.S_max > m.cutoff.a2) cuts.push_back(std::log(H.S_max));
  std::vector<double> edges;
  for (std::size_t r = 0; r + 1 < cuts.size(); ++r)
    for (int k = 0; k < panels; ++k)
      edges.push_back(cuts[r] + (cuts[r + 1] - cuts[r]) * k / panels);
  edges.push_back(cuts.back());
  const std::size_t P = edges.size() - 1;

  std::array<std::vector<cplx>, 2> beta;
  for (int c = 0; c < 2; ++c) {
    beta[c].resize(half);
    for (std::size_t k = 0; k < half; ++k)
      beta[c][k] = cplx(c == 1 ? -m.lambda0 : 0.0, kTwoPi * static_cast<double>(k) * p.omega);
  }
  const std::size_t keep = p.dealias ? n / 3 : half - 1;

  for (const double sg : {1.0, -1.0}) {
    // gq[(panel * nq + q) * 2 + c][k] = e^{beta u / lambda} F_k(sigma) / |lambda|
    std::vector<std::vector<cplx>> gq(P * nq * 2, std::vector<cplx>(half));
    std::vector<double> fv0(n), fv1(n);
    for (std::size_t pi = 0; pi < P; ++pi) {
      const double mid = 0.5 * (edges[pi] + edges[pi + 1]), hw = 0.5 * (edges[pi + 1] - edges[pi]);
      for (int q = 0; q < nq; ++q) {
        const double u = mid + hw * g.x[q];
        const double sig = sg * std::exp(u);
        const double ph = taylor ? m.cutoff.phi(sig) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          std::array<double, 2> f{0.0, 0.0};
          if (ph != 0.0) {
            const double th = PeriodicFn::node(i, n);
            if (!taylor) {
              f = p.source_override(th, sig);
            } else if (m.eps != 0.0) {
              const auto w = smp.W_node(i, sig);
              const auto poly = horner2(p.source, 0, p.N, sig, [&](const PeriodicFn& fn) { return fn[i]; });
              f = full_source(p, th, sig, w, poly, smp.s_max(),
                              [&](double a, double b) { return smp.W(a, b); });
            }
          }
          fv0[i] = f[0] * ph;
          fv1[i] = f[1] * ph;
        }
        const PeriodicFn F0 = PeriodicFn::from_values(fv0), F1 = PeriodicFn::from_values(fv1);
        for (int c = 0; c < 2; ++c) {
          const PeriodicFn& F = c == 0 ? F0 : F1;
          auto& row = gq[(pi * nq + q) * 2 + c];
          for (std::size_t k = 0; k < half; ++k)
            row[k] = k > keep ? cplx{} : std::exp(beta[c][k] * (u / lam)) * F.coeff(static_cast<long>(k)) / std::abs(lam);
        }
      }
    }
    // cumulative full-panel sums
    std::vector<std::array<std::vector<cplx>, 2>> cum(P + 1);
    for (int c = 0; c < 2; ++c) cum[0][c].assign(half, cplx{});
    for (std::size_t pi = 0; pi < P; ++pi) {
      const double hw = 0.5 * (edges[pi + 1] - edges[pi]);
      for (int c = 0; c < 2; ++c) {
        cum[pi + 1][c] = cum[pi][c];
        for (int q = 0; q < nq; ++q) {
          const auto& row = gq[(pi * nq + q) * 2 + c];
          for (std::size_t k = 0; k < half; ++k) cum[pi + 1][c][k] += hw * g.w[q] * row[k];
        }
      }
    }

    for (std::size_t l = 0; l < H.n_cheb; ++l) {
      const double s = s_nodes[l];
      if (s == 0.0 || (s > 0.0) != (sg > 0.0)) continue;
      const double lr = std::log(std::abs(s));
      std::array<std::vector<cplx>, 2> acc;
      for (int c = 0; c < 2; ++c) acc[c].assign(half, cplx{});
      const double top = std::min(lr, edges.back());
      if (top > edges.front()) {
        std::size_t pi = static_cast<std::size_t>(
            std::upper_bound(edges.begin(), edges.end(), top) - edges.begin());
        pi = std::min(pi, P) - 1;
        const double mid = 0.5 * (edges[pi] + edges[pi + 1]), hw = 0.5 * (edges[pi + 1] - edges[pi]);
        const auto pw = partial_gauss_weights(g, std::clamp((top - mid) / hw, -1.0, 1.0));
        for (int c = 0; c < 2; ++c) {
          acc[c] = cum[pi][c];
          for (int q = 0; q < nq; ++q) {
            const auto& row = gq[(pi * nq + q) * 2 + c];
            for (std::size_t k = 0; k < half; ++k) acc[c][k] += hw * pw[q] * row[k];
          }
        }
      }
      const double sN = std::pow(s, Nd);
      const double t_c = std::max(0.0, (lr - std::log(p.sigma_c)) / -lam);
      for (int c = 0; c < 2; ++c) {
        std::vector<cplx> u(n, cplx{});
        for (std::size_t k = 0; k < half; ++k) {
          cplx h = -std::exp(-beta[c][k] * (lr / lam)) * acc[c][k];
          if (taylor && t_c < T_max && k <= keep) {
            double si = sN;
            for (std::size_t i = p.N; i < p.source.order(); ++i, si *= s) {
              const PeriodicFn& S = c == 0 ? p.source.c[i].comp1 : p.source.c[i].comp2;
              h -= S.coeff(static_cast<long>(k)) * si *
                   exp_integral(beta[c][k] + static_cast<double>(i) * lam, t_c, T_max);
            }
          }
          u[k] = h / sN;
          if (k) u[n - k] = std::conj(u[k]);
        }
        const PeriodicFn col = PeriodicFn::from_coeffs(std::move(u));
        for (std::size_t i = 0; i < n; ++i) out.at(c, i, l) = col[i];
      }
    }
  }

  // s = 0 column (odd n_cheb): the s^N coefficient of the closed-form part,
  // checked against Richardson extrapolation from the two nearest node pairs
  if (H.n_cheb % 2) {
    const std::size_t z = H.n_cheb / 2;
    const double scale = std::max(out.sup_norm(), 1e-300);
    for (int c = 0; c < 2; ++c) {
      std::vector<cplx> u(n, cplx{});
      if (taylor && p.source.order() > p.N)
        for (std::size_t k = 0; k <= std::min(keep, half - 1); ++k) {
          const PeriodicFn& S = c == 0 ? p.source.c[p.N].comp1 : p.source.c[p.N].comp2;
          u[k] = -S.coeff(static_cast<long>(k)) * exp_integral(beta[c][k] + Nd * lam, 0.0, T_max);
          if (k) u[n - k] = std::conj(u[k]);
        }
      const PeriodicFn col = PeriodicFn::from_coeffs(std::move(u));
      const double s1 = s_nodes[z - 1], s2 = s_nodes[z - 2];
      for (std::size_t i = 0; i < n; ++i) {
        const double a1 = 0.5 * (out.at(c, i, z - 1) + out.at(c, i, z + 1));
        const double a2 = 0.5 * (out.at(c, i, z - 2) + out.at(c, i, z + 2));
        const double rich = (s2 * s2 * a1 - s1 * s1 * a2) / (s2 * s2 - s1 * s1);
        const double v = taylor ? col[i] : rich;
        if (taylor && !(std::abs(v - rich) / scale < 1e-6))
          fail(ErrorKind::numerical, "tail s = 0 column is inconsistent with its neighbours");
        out.at(c, i, z) = v;
      }
    }
  }
  return out;
}

}  // namespace detail

/// eps Y^>(theta, s): the part of eps Ybar(W, W~) of order >= N in s, with W
/// from the exact interpolant.
inline std::array<double, 2> eps_y_tail(const TailProblem& p, const TailField& field, double theta,
                                        double s) {
  if (p.source_override) return p.source_override(theta, s);
  if (p.model->eps == 0.0) return {0.0, 0.0};
  const Phases ph(theta, field.n());
  auto ev = [&](const PeriodicFn& f) { return f.eval(ph); };
  if (std::abs(s) < p.sigma_c) {
    const auto y = detail::horner2(p.source, p.N, p.source.order(), s, ev);
    const double sN = std::pow(s, static_cast<double>(p.N));
    return {y[0] * sN, y[1] * sN};
  }
  const auto poly = detail::horner2(p.source, 0, p.N, s, ev);
  return detail::full_source(p, theta, s, field.W(theta, ph, s), poly, field.s_max(),
                             [&](double a, double b) { return field.W(a, b); });
}

/// Y^> without the eps factor; zero by convention when eps = 0.
inline std::array<double, 2> y_tail(const TailProblem& p, const TailField& field, double theta,
                                    double s) {
  if (p.model->eps == 0.0 && !p.source_override) return {0.0, 0.0};
  const auto e = eps_y_tail(p, field, theta, s);
  const double k = p.model->eps == 0.0 ? 1.0 : 1.0 / p.model->eps;
  return {e[0] * k, e[1] * k};
}

/// One application of the tail operator:
///   H'(theta, s) = -int_0^T diag(1, e^{-lambda0 t}) eps Y^>(H; theta + omega t, s e^{lambda t}) phi(s e^{lambda t}) dt,
/// T = ln(tail_tol) / (N lambda - lambda0). Panels are doubled until the result
/// moves by at most qtol in the weighted norm.
inline TailFn gamma_tail_apply(const TailProblem& p, const TailFn& H, const QuadConfig& quad) {
  const Model& m = *p.model;
  const double rate = static_cast<double>(p.N) * p.lambda - m.lambda0;
  if (!(rate < 0.0)) fail(ErrorKind::numerical, "N lambda - lambda0 must be negative");
  if (!(p.sigma_c < m.cutoff.a1)) fail(ErrorKind::invalid_input, "sigma_c must lie below a1");
  if (m.eps == 0.0 && !p.source_override) return TailFn::zero(H.N, H.S_max, H.n_theta, H.n_cheb);
  const double T_max = std::log(quad.tail_tol) / rate;
  const detail::TailSampler smp(p.jet, H);
  int panels = std::max(quad.panels, p.panels);
  TailFn coarse = detail::tail_sweep(p, H, smp, panels, quad.nodes_per_panel, T_max);
  for (int level = 0; level < 6; ++level) {
    TailFn fine = detail::tail_sweep(p, H, smp, 2 * panels, quad.nodes_per_panel, T_max);
    const double d = tail_distance(coarse, fine);
    if (d <= quad.qtol) {
      p.panels = panels;
      return fine;
    }
    coarse = std::move(fine);
    panels *= 2;
  }
  fail(ErrorKind::numerical, "tail quadrature did not converge under panel refinement");
}

/// E^> = (omega d_theta + lambda s d_s) W^> - (0, lambda0 W^>_2) - eps Y^> phi(s) on a grid
/// doubled in both directions; returns sup |E^>| / |s|^N.
inline double residual_tail(const TailProblem& p, const TailFn& tail) {
  const Model& m = *p.model;
  const std::size_t nt = tail.n_theta, nc = tail.n_cheb;
  const auto x = tail.s_nodes();
  const auto D = chebyshev_diff_matrix(x);
  const auto w = barycentric_weights(x.size());
  const std::size_t nt2 = 2 * nt, nc2 = 2 * nc;
  const auto x2 = chebyshev_lobatto(nc2, tail.S_max);
  const double Nd = static_cast<double>(tail.N);
  const detail::TailSampler smp(p.jet, tail);

  std::array<std::vector<double>, 2> Vs;  // d_s V on the original nodes
  for (int c = 0; c < 2; ++c) {
    Vs[c].assign(nt * nc, 0.0);
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t l = 0; l < nc; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < nc; ++k) acc += D[l * nc + k] * tail.at(c, i, k);
        Vs[c][i * nc + l] = acc;
      }
  }
  FTSeries jet2, src2;
  for (const auto& c : p.jet.c) jet2.c.push_back(c.resample(nt2));
  for (const auto& c : p.source.c) src2.c.push_back(c.resample(nt2));

  double worst = 0.0;
  std::vector<double> row;
  std::vector<double> v(nt), vs(nt);
  for (std::size_t l = 0; l < nc2; ++l) {
    const double s = x2[l];
    if (s == 0.0) continue;
    barycentric_row(x, w, s, row);
    const double sN = std::pow(s, Nd);
    const double phs = p.source_override ? 1.0 : m.cutoff.phi(s);
    std::array<PeriodicFn, 2> fv, ft, fs;
    for (int c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < nt; ++i) {
        double a = 0.0, b = 0.0;
        const double* vr = &tail.V[c][i * nc];
        const double* sr = &Vs[c][i * nc];
        for (std::size_t k = 0; k < nc; ++k) {
          a += row[k] * vr[k];
          b += row[k] * sr[k];
        }
        v[i] = a;
        vs[i] = b;
      }
      const PeriodicFn pv = PeriodicFn::from_values(v);
      fv[c] = pv.resample(nt2);
      ft[c] = differentiate(pv).resample(nt2);
      fs[c] = PeriodicFn::from_values(vs).resample(nt2);
    }
    for (std::size_t i = 0; i < nt2; ++i) {
      const double th = PeriodicFn::node(i, nt2);
      std::array<double, 2> src{0.0, 0.0};
      if (phs != 0.0) {
        if (p.source_override) {
          src = p.source_override(th, s);
        } else if (m.eps != 0.0) {
          auto at = [&](const PeriodicFn& f) { return f[i]; };
          if (std::abs(s) < p.sigma_c) {
            const auto y = detail::horner2(src2, p.N, src2.order(), s, at);
            src = {y[0] * sN, y[1] * sN};
          } else {
            auto wj = detail::horner2(jet2, 0, jet2.order(), s, at);
            if (jet2.c[0].lift) wj[0] += th;
            const std::array<double, 2> W{wj[0] + sN * fv[0][i], wj[1] + sN * fv[1][i]};
            const auto poly = detail::horner2(src2, 0, p.N, s, at);
            src = detail::full_source(p, th, s, W, poly, tail.S_max,
                                      [&](double a, double b) { return smp.W(a, b); });
          }
        }
      }
      for (int c = 0; c < 2; ++c) {
        // W^> = s^N V: d_theta = s^N V_theta, s d_s = N s^N V + s^{N+1} V_s
        const double lhs = p.omega * sN * ft[c][i] +
                           p.lambda * (Nd * sN * fv[c][i] + sN * s * fs[c][i]) -
                           (c == 1 ? m.lambda0 * sN * fv[c][i] : 0.0);
        worst = std::max(worst, std::abs(lhs - src[c] * phs) / std::abs(sN));
      }
    }
  }
  return worst;
}

struct TailSolution {
  TailFn tail;
  SolveReport report;
};

inline TailSolution solve_tail(const TailProblem& p, const SolverConfig& cfg) {
  const Model& m = *p.model;
  TailSolution sol;
  sol.report.stage = "tail";
  TailFn H = TailFn::zero(p.N, tail_s_max(m), p.jet.size(), cfg.n_cheb);
  for (int k = 0; k < cfg.max_iter; ++k) {
    TailFn next;
    try {
      next = gamma_tail_apply(p, H, cfg.quad);
    } catch (const Error& e) {
      sol.report.message = e.what();
      break;
    }
    const double d = tail_distance(H, next);
    sol.report.push(d);
    sol.report.iterations = k + 1;
    H = std::move(next);
    if (d < cfg.tol) {
      sol.report.converged = true;
      break;
    }
    if (sol.report.diverging()) {
      sol.report.message = "distance grew for 5 consecutive steps";
      break;
    }
  }
  if (!sol.report.converged && sol.report.message.empty()) sol.report.message = "max_iter reached";
  sol.tail = std::move(H);
  sol.report.residual = residual_tail(p, sol.tail);
  return sol;
}

inline json tail_to_json(const TailFn& t) {
  return {{"N", t.N}, {"S_max", t.S_max}, {"n_theta", t.n_theta}, {"n_cheb", t.n_cheb},
          {"V", {t.V[0], t.V[1]}}};
}

inline TailFn tail_from_json(const json& j) {
  TailFn t;
  try {
    t.N = j.at("N").get<std::size_t>();
    t.S_max = j.at("S_max").get<double>();
    t.n_theta = j.at("n_theta").get<std::size_t>();
    t.n_cheb = j.at("n_cheb").get<std::size_t>();
    t.V[0] = j.at("V").at(0).get<std::vector<double>>();
    t.V[1] = j.at("V").at(1).get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("/tail: ") + e.what());
  }
  if (t.V[0].size() != t.n_theta * t.n_cheb || t.V[1].size() != t.n_theta * t.n_cheb)
    fail(ErrorKind::invalid_input, "/tail/V: size does not match n_theta * n_cheb");
  return t;
}

}  // namespace isochron

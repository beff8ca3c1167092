#pragma once

// Fourier-Taylor series: truncated power series in s whose coefficients are
// periodic functions of theta sampled on a common grid. All nonlinear
// operations are carried out node by node on one-variable Series.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "isochron/error.hpp"
#include "isochron/expr.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/series.hpp"

namespace isochron {

struct ScalarFT {
  std::vector<PeriodicFn> c;

  static ScalarFT zero(std::size_t order, std::size_t n) {
    return {std::vector<PeriodicFn>(order, PeriodicFn::constant(n, 0.0))};
  }
  std::size_t order() const { return c.size(); }
  std::size_t size() const { return c.empty() ? 0 : c[0].size(); }

  Series at_node(std::size_t m) const {
    Series s(order());
    for (std::size_t j = 0; j < order(); ++j) s[j] = c[j][m];
    return s;
  }
};

struct FTSeries {
  std::vector<PlaneLoop> c;

  /// (theta, 0) + (0, 1) s, padded with zeros to the requested order.
  static FTSeries identity(std::size_t order, std::size_t n) {
    FTSeries w;
    w.c.push_back(PlaneLoop::identity(n));
    if (order > 1) w.c.push_back(PlaneLoop::constant(n, 0.0, 1.0));
    while (w.c.size() < order) w.c.push_back(PlaneLoop::constant(n, 0.0, 0.0));
    w.c.resize(order);
    return w;
  }
  static FTSeries zero(std::size_t order, std::size_t n) {
    return {std::vector<PlaneLoop>(order, PlaneLoop::constant(n, 0.0, 0.0))};
  }

  std::size_t order() const { return c.size(); }
  std::size_t size() const { return c.empty() ? 0 : c[0].size(); }

  /// Series in s of component i at grid node m (the lift's theta included).
  Series at_node(int i, std::size_t m) const {
    Series s(order());
    for (std::size_t j = 0; j < order(); ++j) s[j] = c[j].node_value(i, m);
    return s;
  }

  FTSeries resample(std::size_t n) const {
    FTSeries r;
    for (const auto& p : c) r.c.push_back(p.resample(n));
    return r;
  }

  /// Value of component i at (theta, s) by Horner in s.
  double value(int i, double theta, double s) const {
    double v = 0.0;
    for (std::size_t j = order(); j-- > 0;) v = v * s + c[j].value(i, theta);
    return v;
  }
};

namespace detail {

/// Collects per-node series into an order x n table and builds PeriodicFns.
class JetBuilder {
 public:
  JetBuilder(std::size_t order, std::size_t n) : v_(order, std::vector<double>(n, 0.0)) {}
  void set(std::size_t m, const Series& s) {
    for (std::size_t j = 0; j < v_.size(); ++j) v_[j][m] = s[j];
  }
  void add_to(std::size_t j, std::size_t m, double x) { v_[j][m] += x; }
  PeriodicFn take(std::size_t j) { return PeriodicFn::from_values(std::move(v_[j])); }
  ScalarFT scalar() {
    ScalarFT r;
    for (std::size_t j = 0; j < v_.size(); ++j) r.c.push_back(take(j));
    return r;
  }

 private:
  std::vector<std::vector<double>> v_;
};

inline FTSeries make_ft(JetBuilder& a, JetBuilder& b, std::size_t order, bool lift0) {
  FTSeries r;
  for (std::size_t j = 0; j < order; ++j) r.c.push_back({a.take(j), b.take(j), j == 0 && lift0});
  return r;
}

}  // namespace detail

inline ScalarFT ft_mul(const ScalarFT& a, const ScalarFT& b) {
  if (a.order() != b.order() || a.size() != b.size())
    fail(ErrorKind::invalid_input, "ft_mul: mismatched orders or grids");
  const std::size_t n = a.size();
  ScalarFT r;
  for (std::size_t j = 0; j < a.order(); ++j) {
    std::vector<double> v(n, 0.0);
    for (std::size_t i = 0; i <= j; ++i)
      for (std::size_t m = 0; m < n; ++m) v[m] += a.c[i][m] * b.c[j - i][m];
    r.c.push_back(PeriodicFn::from_values(std::move(v)));
  }
  return r;
}

/// Evaluates e on jets; `eps` is bound as a constant unless env supplies it.
inline ScalarFT expr_eval_jet(const Expr& e, const std::map<std::string, ScalarFT>& env, double eps) {
  std::vector<const ScalarFT*> bound;
  std::size_t order = 0, n = 0;
  for (const auto& name : e.variables()) {
    auto it = env.find(name);
    if (it == env.end()) {
      if (name == "eps") {
        bound.push_back(nullptr);
        continue;
      }
      fail(ErrorKind::invalid_input, "unbound variable '" + name + "'");
    }
    bound.push_back(&it->second);
    order = it->second.order();
    n = it->second.size();
  }
  if (order == 0) fail(ErrorKind::invalid_input, "expr_eval_jet needs at least one jet variable");
  for (const auto* p : bound)
    if (p && (p->order() != order || p->size() != n))
      fail(ErrorKind::invalid_input, "expr_eval_jet: mismatched jets");
  detail::JetBuilder out(order, n);
  std::vector<Series> vars(bound.size());
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t i = 0; i < bound.size(); ++i)
      vars[i] = bound[i] ? bound[i]->at_node(m) : Series(order, eps);
    out.set(m, evaluate<Series>(e, vars, Series(order)));
  }
  return out.scalar();
}

/// Jet of W(theta + delta, s sigma) with delta = -omega rho and
/// sigma = exp(-lambda rho). The order-one shift delta0 is applied by spectral
/// interpolation, the O(s) remainder by a Taylor expansion in theta.
inline FTSeries delayed_composition(const FTSeries& W, const ScalarFT& rho, double omega,
                                    double lambda) {
  const std::size_t N = W.order(), n = W.size();
  if (rho.order() != N || rho.size() != n)
    fail(ErrorKind::invalid_input, "delayed_composition: delay jet does not match W");

  // deriv[k][j][i] = k-th theta derivative of the periodic part of W^j_i
  std::vector<std::vector<std::array<PeriodicFn, 2>>> deriv(N);
  for (std::size_t k = 0; k < N; ++k)
    for (std::size_t j = 0; j < N; ++j)
      deriv[k].push_back({differentiate(W.c[j].comp1, static_cast<int>(k)),
                          differentiate(W.c[j].comp2, static_cast<int>(k))});
  const bool lift = W.c[0].lift;

  detail::JetBuilder out1(N, n), out2(N, n);
  std::vector<Series> spow(N), dpow(N);
  for (std::size_t m = 0; m < n; ++m) {
    const Series r = rho.at_node(m);
    const double th = PeriodicFn::node(m, n);
    const double d0 = -omega * r[0];
    Series dplus = -omega * r;
    dplus[0] = 0.0;
    const Series sigma = exp(-lambda * r);
    Series ssig(N);  // s * sigma
    for (std::size_t j = 1; j < N; ++j) ssig[j] = sigma[j - 1];
    spow[0] = Series(N, 1.0);
    dpow[0] = Series(N, 1.0);
    for (std::size_t j = 1; j < N; ++j) {
      spow[j] = spow[j - 1] * ssig;
      dpow[j] = dpow[j - 1] * dplus;
    }

    const double x = th + d0;
    const Phases ph(x, n);
    for (int i = 0; i < 2; ++i) {
      Series acc(N);
      double fact = 1.0;
      for (std::size_t k = 0; k < N; ++k) {
        if (k > 0) fact *= static_cast<double>(k);
        Series inner(N);
        for (std::size_t j = 0; j < N; ++j) {
          double val = deriv[k][j][i].eval(ph);
          if (i == 0 && j == 0 && lift) {
            // identity part of the lift: theta itself contributes x, its slope 1
            if (k == 0) val += d0;
            if (k == 1) val += 1.0;
          }
          if (val != 0.0) inner += val * spow[j];
        }
        acc += (1.0 / fact) * (inner * dpow[k]);
      }
      (i == 0 ? out1 : out2).set(m, acc);
    }
  }
  return detail::make_ft(out1, out2, N, lift);
}

/// Jet of the extended delay rho(W) phi(W_2).
inline ScalarFT rho_jet(const Model& model, const FTSeries& W, bool assume_interior = false) {
  const std::size_t N = W.order(), n = W.size();
  detail::JetBuilder out(N, n);
  for (std::size_t m = 0; m < n; ++m) {
    const Series u1 = W.at_node(0, m), u2 = W.at_node(1, m);
    if (assume_interior) {
      const Series v = model.eval_rho(u1, u2);
      model.check_rho(v[0]);
      out.set(m, v);
    } else {
      out.set(m, model.rho_bar(u1, u2));
    }
  }
  return out.scalar();
}

/// Taylor coefficients in s of eps * Ybar(W, W~, eps), where
/// Ybar = Y phi(W_2) phi(W~_2). The result is fully periodic.
inline FTSeries rhs_jet(const Model& model, const FTSeries& W, double omega, double lambda,
                        bool assume_interior = false) {
  const std::size_t N = W.order(), n = W.size();
  if (model.eps == 0.0) return FTSeries::zero(N, n);
  const ScalarFT rho = rho_jet(model, W, assume_interior);
  const FTSeries Wt = delayed_composition(W, rho, omega, lambda);
  detail::JetBuilder out1(N, n), out2(N, n);
  for (std::size_t m = 0; m < n; ++m) {
    const Series u1 = W.at_node(0, m), u2 = W.at_node(1, m);
    const Series v1 = Wt.at_node(0, m), v2 = Wt.at_node(1, m);
    Series weight(N, 1.0);
    if (!assume_interior) {
      weight = model.cutoff.phi(u2) * model.cutoff.phi(v2);
      if (weight[0] == 0.0) continue;  // identically zero near this node
    }
    const auto y = model.evalY(u1, u2, v1, v2);
    out1.set(m, model.eps * (y[0] * weight));
    out2.set(m, model.eps * (y[1] * weight));
  }
  return detail::make_ft(out1, out2, N, false);
}

}  // namespace isochron

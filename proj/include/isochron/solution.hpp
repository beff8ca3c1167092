#pragma once

// The assembled parameterization W = jet + tail with (omega, lambda), the
// staged pipeline that produces it, and its JSON form.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isochron/error.hpp"
#include "isochron/jet.hpp"
#include "isochron/model.hpp"
#include "isochron/periodic.hpp"
#include "isochron/solver_variational.hpp"
#include "isochron/solver_zero.hpp"
#include "isochron/tail.hpp"

namespace isochron {

struct Solution {
  double omega = 0.0;
  double lambda = 0.0;
  FTSeries W;  // orders 0..N-1
  TailFn tail;
  std::string model_fingerprint;
  std::vector<SolveReport> reports;

  std::size_t N() const { return W.order(); }
  bool converged() const {
    for (const auto& r : reports)
      if (!r.converged) return false;
    return !reports.empty();
  }
  const SolveReport* report(const std::string& stage) const {
    for (const auto& r : reports)
      if (r.stage == stage) return &r;
    return nullptr;
  }
  /// W(theta, s) with the tail.
  std::array<double, 2> eval(double theta, double s) const { return tail_eval(W, tail, theta, s); }
};

/// Warm-start data for the iterative stages.
struct SolveGuess {
  std::optional<ZeroIterate> zero;
  std::optional<FirstIterate> first;
};

/// Runs the stages in order. A stage that does not converge stops the pipeline;
/// the remaining orders are zero and the later stages are reported as skipped.
inline Solution solve_all(const Model& model, const SolverConfig& cfg,
                          const SolveGuess& guess = {}) {
  cfg.validate();
  const Model m = cfg.apply(model);
  Solution sol;
  sol.model_fingerprint = model_fingerprint(model);
  const std::size_t n = cfg.modes, N = cfg.order;
  auto skip = [&](const std::string& stage) {
    SolveReport r;
    r.stage = stage;
    r.message = "skipped after an earlier stage failed";
    sol.reports.push_back(r);
  };
  auto finish = [&](std::size_t from_order) {
    while (sol.W.order() < N) sol.W.c.push_back(PlaneLoop::constant(n, 0.0, 0.0));
    for (std::size_t j = from_order; j < N; ++j) skip(j == 1 ? "first" : "order " + std::to_string(j));
    skip("tail");
    sol.tail = TailFn::zero(N, tail_s_max(m), n, cfg.n_cheb);
    return sol;
  };

  const ZeroSolution z = solve_zero(m, cfg, guess.zero);
  sol.omega = z.omega;
  sol.W.c.push_back(z.W0);
  sol.reports.push_back(z.report);
  sol.lambda = m.lambda0;
  if (!z.report.converged) return finish(1);

  std::optional<FirstIterate> g1 = guess.first;
  if (g1 && g1->F.size() != n) g1->F = g1->F.resample(n);
  const FirstSolution f = solve_first(m, z.omega, z.W0, cfg, g1);
  sol.lambda = f.lambda;
  sol.W.c.push_back(f.W1);
  sol.reports.push_back(f.report);
  if (!f.report.converged) return finish(2);

  for (std::size_t j = 2; j < N; ++j) {
    auto [wj, rep] = solve_order_j(m, sol.omega, sol.lambda, sol.W, j, cfg);
    sol.W.c.push_back(std::move(wj));
    sol.reports.push_back(rep);
    if (!rep.converged) return finish(j + 1);
  }

  const TailProblem p = make_tail_problem(m, sol.W, sol.omega, sol.lambda, cfg);
  TailSolution t = solve_tail(p, cfg);
  sol.tail = std::move(t.tail);
  sol.reports.push_back(t.report);
  return sol;
}

// ---- JSON ----

inline json periodic_to_json(const PeriodicFn& f) {
  json c = json::array();
  for (std::size_t k = 0; k <= f.size() / 2; ++k) {
    const cplx z = f.coeffs()[k];
    c.push_back({z.real(), z.imag()});
  }
  return {{"n", f.size()}, {"coeffs", std::move(c)}};
}

inline PeriodicFn periodic_from_json(const json& j, const std::string& ptr) {
  std::size_t n = 0;
  std::vector<cplx> c;
  try {
    n = j.at("n").get<std::size_t>();
    const auto& a = j.at("coeffs");
    if (!a.is_array() || a.size() != n / 2 + 1)
      fail(ErrorKind::invalid_input, ptr + "/coeffs: expected n/2 + 1 entries");
    c.assign(n, cplx{});
    for (std::size_t k = 0; k <= n / 2; ++k) {
      c[k] = cplx(a[k].at(0).get<double>(), a[k].at(1).get<double>());
      if (k > 0 && k < n / 2) c[n - k] = std::conj(c[k]);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, ptr + ": " + e.what());
  }
  return PeriodicFn::from_coeffs(std::move(c));
}

inline json loop_to_json(const PlaneLoop& w) {
  return {{"comp1", periodic_to_json(w.comp1)}, {"comp2", periodic_to_json(w.comp2)}, {"lift", w.lift}};
}

inline PlaneLoop loop_from_json(const json& j, const std::string& ptr) {
  PlaneLoop w;
  try {
    w.comp1 = periodic_from_json(j.at("comp1"), ptr + "/comp1");
    w.comp2 = periodic_from_json(j.at("comp2"), ptr + "/comp2");
    w.lift = j.at("lift").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, ptr + ": " + e.what());
  }
  if (w.comp1.size() != w.comp2.size()) fail(ErrorKind::invalid_input, ptr + ": component sizes differ");
  return w;
}

namespace detail {
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline json report_to_json(const SolveReport& r, double noise_floor = 1e-13) {
  json d = json::array(), q = json::array();
  for (double x : r.distances) d.push_back(detail::number_or_null(x));
  for (double x : r.ratios) q.push_back(detail::number_or_null(x));
  return {{"stage", r.stage},
          {"iterations", r.iterations},
          {"distances", d},
          {"ratios", q},
          {"residual", detail::number_or_null(r.residual)},
          {"converged", r.converged},
          {"message", r.message},
          {"mu_hat", detail::number_or_null(r.mu_hat(noise_floor))},
          {"bound", detail::number_or_null(r.bound(noise_floor))}};
}

inline SolveReport report_from_json(const json& j) {
  SolveReport r;
  try {
    r.stage = j.at("stage").get<std::string>();
    r.iterations = j.at("iterations").get<int>();
    for (const auto& x : j.at("distances")) r.distances.push_back(detail::number_from(x));
    for (const auto& x : j.at("ratios")) r.ratios.push_back(detail::number_from(x));
    r.residual = detail::number_from(j.at("residual"));
    r.converged = j.at("converged").get<bool>();
    r.message = j.at("message").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("/reports: ") + e.what());
  }
  return r;
}

inline json solution_to_json(const Solution& s) {
  json w = json::array(), reps = json::array();
  for (const auto& c : s.W.c) w.push_back(loop_to_json(c));
  for (const auto& r : s.reports) reps.push_back(report_to_json(r));
  return {{"omega", s.omega},
          {"lambda", s.lambda},
          {"N", s.N()},
          {"W", std::move(w)},
          {"tail", tail_to_json(s.tail)},
          {"model_fingerprint", s.model_fingerprint},
          {"reports", std::move(reps)}};
}

inline Solution solution_from_json(const json& j) {
  Solution s;
  try {
    s.omega = j.at("omega").get<double>();
    s.lambda = j.at("lambda").get<double>();
    const auto N = j.at("N").get<std::size_t>();
    const auto& w = j.at("W");
    if (!w.is_array() || w.size() != N) fail(ErrorKind::invalid_input, "/W: expected N loops");
    for (std::size_t i = 0; i < N; ++i) s.W.c.push_back(loop_from_json(w[i], "/W/" + std::to_string(i)));
    s.tail = tail_from_json(j.at("tail"));
    s.model_fingerprint = j.at("model_fingerprint").get<std::string>();
    for (const auto& r : j.at("reports")) s.reports.push_back(report_from_json(r));
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("solution: ") + e.what());
  }
  if (s.N() < 2) fail(ErrorKind::invalid_input, "/N: must be at least 2");
  for (const auto& c : s.W.c)
    if (c.size() != s.W.size()) fail(ErrorKind::invalid_input, "/W: loop sizes differ");
  if (s.tail.N != s.N() || s.tail.n_theta != s.W.size())
    fail(ErrorKind::invalid_input, "/tail: grid does not match W");
  return s;
}

inline std::string solution_to_string(const Solution& s) { return solution_to_json(s).dump(1) + "\n"; }

inline Solution load_solution(const std::string& path) {
  return solution_from_json(parse_json_text(read_text_file(path), path));
}

inline void save_solution(const Solution& s, const std::string& path) {
  write_text_file(path, solution_to_string(s));
}

}  // namespace isochron

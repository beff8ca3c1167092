// isochron: solve, check and simulate the isochron parameterization of a
// delay-perturbed planar limit cycle.
//
// Exit codes: 0 success, 1 input/I-O/domain error, 2 a stage did not
// converge, 3 a residual exceeded 100 x tol.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isochron/isochron.hpp"

using namespace isochron;

namespace {

constexpr int kOk = 0, kInputError = 1, kNotConverged = 2, kResidualExceeded = 3;

struct SolverFlags {
  SolverConfig cfg;
  double a1 = NAN, a2 = NAN;
  bool no_dealias = false;

  void add(CLI::App* app) {
    app->add_option("--modes", cfg.modes, "Fourier modes per component (power of two >= 8)");
    app->add_option("--order", cfg.order, "jet order N >= 2");
    app->add_option("--tol", cfg.tol, "fixed-point stopping distance");
    app->add_option("--max-iter", cfg.max_iter, "iterations per stage");
    app->add_option("--cheb", cfg.n_cheb, "Chebyshev nodes in s for the tail");
    app->add_option("--normalization", cfg.normalization, "mean of W1_2");
    app->add_option("--a1", a1, "cut-off inner radius override");
    app->add_option("--a2", a2, "cut-off outer radius override");
    app->add_flag("--no-dealias", no_dealias, "keep every Fourier mode of the right-hand sides");
  }

  SolverConfig config() const {
    SolverConfig c = cfg;
    if (std::isfinite(a1)) c.a1 = a1;
    if (std::isfinite(a2)) c.a2 = a2;
    c.dealias = !no_dealias;
    return c;
  }
};

std::string fmt(double v) { return format_double(v); }

void print_reports(const Solution& sol) {
  for (const auto& r : sol.reports)
    std::printf("%-8s iterations %3d  mu_hat %-12.4g residual %-12.4g %s%s%s\n", r.stage.c_str(),
                r.iterations, r.mu_hat(1e-13), r.residual, r.converged ? "converged" : "NOT converged",
                r.message.empty() ? "" : ": ", r.message.c_str());
}

int cmd_solve(const std::string& model_path, const SolverFlags& flags, const std::string& out) {
  const Model m = load_model(model_path);
  const Solution sol = solve_all(m, flags.config());
  std::printf("omega %s\nlambda %s\n", fmt(sol.omega).c_str(), fmt(sol.lambda).c_str());
  print_reports(sol);
  save_solution(sol, out);
  return sol.converged() ? kOk : kNotConverged;
}

Solution load_matching(const Model& m, const std::string& solution_path) {
  Solution sol = load_solution(solution_path);
  if (sol.model_fingerprint != model_fingerprint(m))
    fail(ErrorKind::invalid_input, "solution was computed for a different model (fingerprint mismatch)");
  return sol;
}

int cmd_residual(const std::string& model_path, const std::string& solution_path, const SolverFlags& flags) {
  const Model model = load_model(model_path);
  const Solution sol = load_matching(model, solution_path);
  SolverConfig cfg = flags.config();
  cfg.modes = sol.W.size();
  cfg.order = sol.N();
  cfg.n_cheb = sol.tail.n_cheb;
  const Model m = cfg.apply(model);

  std::vector<std::pair<std::string, double>> norms;
  norms.emplace_back("E0", residual_zero(m, sol.omega, sol.W.c[0]).second);
  for (std::size_t j = 1; j < sol.N(); ++j)
    norms.emplace_back("E" + std::to_string(j), residual_order(m, sol.omega, sol.lambda, sol.W, j).second);
  const TailProblem p = make_tail_problem(m, sol.W, sol.omega, sol.lambda, cfg);
  norms.emplace_back("E>", residual_tail(p, sol.tail));

  const double limit = 100.0 * cfg.tol;
  bool ok = true;
  for (const auto& [name, v] : norms) {
    const bool pass = v <= limit;
    ok = ok && pass;
    std::printf("%-3s %-12.4g %s\n", name.c_str(), v, pass ? "ok" : "exceeds 100*tol");
  }
  std::printf("%s\n", aposteriori_report(m, sol, cfg.noise_floor).dump(1).c_str());
  return ok ? kOk : kResidualExceeded;
}

struct OrbitFlags {
  double theta = 0.0, s = 0.0, T = 1.0, dt = 1e-3;
  std::size_t n = 1000;
};

int cmd_simulate(const std::string& model_path, const std::string& solution_path, const OrbitFlags& o,
                 const std::string& out) {
  const Model m = load_model(model_path);
  const Solution sol = load_matching(m, solution_path);
  const Parameterization P(m, sol, o.theta, o.s);
  const Trajectory tr = sdde_integrate(m, P.history(), o.T, o.dt, m.h);
  std::string csv = "t,x1,x2,p1,p2,deviation\n";
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const Point p = P.x(tr.t(k));
    const double dev = std::hypot(p[0] - tr.x[k][0], p[1] - tr.x[k][1]);
    worst = std::max(worst, dev);
    csv += fmt(tr.t(k)) + "," + fmt(tr.x[k][0]) + "," + fmt(tr.x[k][1]) + "," + fmt(p[0]) + "," +
           fmt(p[1]) + "," + fmt(dev) + "\n";
  }
  write_text_file(out, csv);
  std::printf("max deviation %.6g over %zu nodes\n", worst, tr.size());
  return kOk;
}

int cmd_defect(const std::string& model_path, const std::string& solution_path, const OrbitFlags& o) {
  const Model m = load_model(model_path);
  const Solution sol = load_matching(m, solution_path);
  const double d = defect_norm(m, sol, o.theta, o.s, o.T, o.n);
  std::printf("defect %s\ncombined_residual %s\n", fmt(d).c_str(), fmt(combined_residual(sol, o.s)).c_str());
  return kOk;
}

void set_param(Model& m, const std::string& name, double v, double a_ratio) {
  if (name == "eps") m.eps = v;
  else if (name == "a1") {
    m.cutoff.a1 = v;
    m.cutoff.a2 = v * a_ratio;
  } else if (name == "a2") m.cutoff.a2 = v;
  else if (name == "omega0") m.omega0 = v;
  else if (name == "lambda0") m.lambda0 = v;
  else if (name == "h") m.h = v;
  else fail(ErrorKind::invalid_input, "unknown sweep parameter '" + name + "'");
  m.validate();
}

struct SweepFlags {
  std::string param;
  double from = 0.0, to = 0.0;
  int steps = 0;
};

int cmd_sweep(const std::string& model_path, const SolverFlags& flags, const SweepFlags& sw,
              const std::string& out) {
  if (sw.steps < 1) fail(ErrorKind::invalid_input, "--steps must be at least 1");
  const Model base = load_model(model_path);
  const SolverConfig cfg = flags.config();
  const double a_ratio = base.cutoff.a2 / base.cutoff.a1;
  std::string csv = "param,omega,lambda,res_zero,res_first,res_orders,res_tail,converged\n";
  std::vector<double> omegas, lambdas, params;
  SolveGuess guess;
  bool all = true;
  for (int i = 0; i < sw.steps; ++i) {
    const double v = sw.steps == 1 ? sw.from : sw.from + (sw.to - sw.from) * i / (sw.steps - 1);
    Model m = base;
    set_param(m, sw.param, v, a_ratio);
    const Solution sol = solve_all(m, cfg, guess);
    double rz = NAN, rf = NAN, ro = 0.0, rt = NAN;
    for (const auto& r : sol.reports) {
      if (r.stage == "zero") rz = r.residual;
      else if (r.stage == "first") rf = r.residual;
      else if (r.stage == "tail") rt = r.residual;
      else ro = std::max(ro, r.residual);
    }
    csv += fmt(v) + "," + fmt(sol.omega) + "," + fmt(sol.lambda) + "," + fmt(rz) + "," + fmt(rf) + "," +
           fmt(ro) + "," + fmt(rt) + "," + (sol.converged() ? "1" : "0") + "\n";
    std::printf("%s=%-12.6g omega %.15g lambda %.15g %s\n", sw.param.c_str(), v, sol.omega, sol.lambda,
                sol.converged() ? "converged" : "NOT converged");
    all = all && sol.converged();
    params.push_back(v);
    omegas.push_back(sol.omega);
    lambdas.push_back(sol.lambda);
    if (sol.converged()) {
      guess.zero = ZeroIterate{sol.omega, sol.W.c[0]};
      guess.first = FirstIterate{sol.lambda, sol.W.c[1]};
    }
  }
  write_text_file(out, csv);
  if (params.size() >= 3) {
    double d2w = 0.0, d2l = 0.0;
    for (std::size_t i = 1; i + 1 < params.size(); ++i) {
      d2w = std::max(d2w, std::abs(omegas[i + 1] - 2 * omegas[i] + omegas[i - 1]));
      d2l = std::max(d2l, std::abs(lambdas[i + 1] - 2 * lambdas[i] + lambdas[i - 1]));
    }
    std::printf("max second difference: omega %.4g lambda %.4g\n", d2w, d2l);
  }
  return all ? kOk : kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isochron parameterization of delay-perturbed limit cycles"};
  app.require_subcommand(1);

  std::string model_path, solution_path, out;
  SolverFlags sflags;
  OrbitFlags oflags;
  SweepFlags swflags;

  auto* solve = app.add_subcommand("solve", "run all stages and write a solution JSON");
  solve->add_option("model", model_path, "model JSON")->required();
  solve->add_option("-o", out, "output solution JSON")->required();
  sflags.add(solve);

  auto* residual = app.add_subcommand("residual", "recompute residual norms of a stored solution");
  residual->add_option("model", model_path)->required();
  residual->add_option("solution", solution_path)->required();
  residual->add_option("--tol", sflags.cfg.tol, "threshold is 100 x tol");
  residual->add_option("--a1", sflags.a1);
  residual->add_option("--a2", sflags.a2);

  auto add_orbit = [&](CLI::App* c) {
    c->add_option("model", model_path)->required();
    c->add_option("solution", solution_path)->required();
    c->add_option("--theta", oflags.theta);
    c->add_option("--s", oflags.s);
    c->add_option("--T", oflags.T);
  };
  auto* simulate = app.add_subcommand("simulate", "integrate from parameterized history and compare");
  add_orbit(simulate);
  simulate->add_option("--dt", oflags.dt);
  simulate->add_option("-o", out, "output CSV")->required();

  auto* defect = app.add_subcommand("defect", "sup defect of the parameterized orbit");
  add_orbit(defect);
  defect->add_option("--n", oflags.n, "sample points");

  auto* sweep = app.add_subcommand("sweep", "re-solve along a parameter grid");
  sweep->add_option("model", model_path)->required();
  sweep->add_option("--param", swflags.param, "eps, a1 (a2 scaled along), a2, omega0, lambda0 or h")->required();
  sweep->add_option("--from", swflags.from)->required();
  sweep->add_option("--to", swflags.to)->required();
  sweep->add_option("--steps", swflags.steps)->required();
  sweep->add_option("-o", out, "output CSV")->required();
  sflags.add(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (solve->parsed()) return cmd_solve(model_path, sflags, out);
    if (residual->parsed()) return cmd_residual(model_path, solution_path, sflags);
    if (simulate->parsed()) return cmd_simulate(model_path, solution_path, oflags, out);
    if (defect->parsed()) return cmd_defect(model_path, solution_path, oflags);
    if (sweep->parsed()) return cmd_sweep(model_path, sflags, swflags, out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::divergence ? kNotConverged : kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}

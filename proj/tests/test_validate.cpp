#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "support.hpp"

using namespace isochron;
using namespace testing_support;

namespace {

SolverConfig small_config() {
  SolverConfig c;
  c.modes = 32;
  c.n_cheb = 8;
  return c;
}

// One solve per process for each eps; the cost dominates this suite.
const Solution& solved(double eps) {
  static std::map<double, Solution> cache;
  static std::map<double, Model> models;
  auto it = cache.find(eps);
  if (it == cache.end()) {
    models.emplace(eps, hopf(eps));
    it = cache.emplace(eps, solve_all(models.at(eps), small_config())).first;
  }
  return it->second;
}

Model cartesian(const std::string& x1, const std::string& x2, const std::string& r, double eps, double h) {
  json j = {{"type", "cartesian"},
            {"omega0", 1.0},
            {"lambda0", -2.0},
            {"eps", eps},
            {"h", h},
            {"X", {x1, x2}},
            {"r", r},
            {"K", {"cos(2*pi*th)/sqrt(1 + s)", "sin(2*pi*th)/sqrt(1 + s)"}},
            {"cutoff", {{"a1", 0.5}, {"a2", 1.0}}}};
  return model_from_json(j);
}

History circle(double radius) {
  return [radius](double t) { return Point{radius * std::cos(kTwoPi * t), radius * std::sin(kTwoPi * t)}; };
}

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// |x' - X(x, eps x(t - r))| at one time, all terms from the parameterization
double defect_at(const Model& m, const Parameterization& p, double t) {
  const auto [x, dx] = p.x_dx(t);
  const Point xd = p.x(t - m.eval_r(x));
  const auto f = m.evalX<double>(x, {m.eps * xd[0], m.eps * xd[1]});
  return std::max(std::abs(dx[0] - f[0]), std::abs(dx[1] - f[1]));
}

}  // namespace

TEST(Trajectory, HermiteReproducesNodesAndCsvFormat) {
  Trajectory tr;
  tr.t0 = 0.0;
  tr.dt = 0.1;
  for (int k = 0; k < 5; ++k) {
    const double t = tr.t(k);
    tr.x.push_back({std::sin(t), t * t});
    tr.dx.push_back({std::cos(t), 2 * t});
  }
  for (std::size_t k = 0; k < tr.size(); ++k) EXPECT_EQ(tr.at(tr.t(k)), tr.x[k]);
  // cubic Hermite is exact on quadratics
  EXPECT_NEAR(tr.at(0.23)[1], 0.23 * 0.23, 1e-15);
  EXPECT_THROW(tr.at(0.5), Error);
  const std::string csv = trajectory_csv(tr);
  EXPECT_EQ(csv.substr(0, 8), "t,x1,x2\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(SddeIntegrate, UnperturbedCycleStaysOnTheCircle) {
  const Model m = hopf(0.0);
  const Trajectory tr = sdde_integrate(m, circle(1.0), 10.0, 1e-3, m.h);
  double worst = 0.0;
  for (const auto& x : tr.x) worst = std::max(worst, std::abs(std::hypot(x[0], x[1]) - 1.0));
  EXPECT_LE(worst, 1e-9);
  // the phase advances at omega0 = 1
  EXPECT_LE(dist(tr.x.back(), circle(1.0)(10.0)), 1e-8);
}

TEST(SddeIntegrate, DecayModelContractsMonotonically) {
  const Model m = cartesian("-x1 + 0.1*y1", "-x2 + 0.1*y2", "0.2", 1.0, 0.2);
  const Trajectory tr = sdde_integrate(m, [](double) { return Point{1.0, -0.5}; }, 25.0, 1e-2, m.h);
  double prev = INFINITY;
  for (const auto& x : tr.x) {
    const double r = std::hypot(x[0], x[1]);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(SddeIntegrate, StepHalvingShowsHighOrder) {
  const Model m = hopf(0.2);
  const History h = circle(0.8);
  auto end = [&](double dt) { return sdde_integrate(m, h, 2.0, dt, m.h).x.back(); };
  const Point a = end(0.02), b = end(0.01), c = end(0.005);
  const double ratio = dist(a, b) / dist(b, c);
  EXPECT_GE(ratio, 11.0);
}

TEST(SddeIntegrate, RejectsBadLagsAndSteps) {
  const Model m = hopf(1e-3);
  EXPECT_THROW(sdde_integrate(m, circle(1.0), 1.0, 1e-3, 0.05), Error);  // lag 0.1..0.2 > span
  const Model ahead = cartesian("x1", "x2", "-0.1", 1e-3, 0.2);
  EXPECT_THROW(sdde_integrate(ahead, circle(1.0), 1.0, 1e-3, 0.2), Error);
  const Model blowup = cartesian("x1^3", "x2", "0.1", 1e-3, 0.2);
  EXPECT_THROW(sdde_integrate(blowup, circle(2.0), 5.0, 1e-2, 0.2), Error);
  EXPECT_THROW(sdde_integrate(m, circle(1.0), 1.0, 0.0, m.h), Error);
}

TEST(ParameterizedOrbit, OnCycleOrbitHasPeriodOneOverOmega) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const Parameterization p(m, sol, 0.17, 0.0);
  for (double t : {0.0, 0.3, 0.71}) EXPECT_LE(dist(p.x(t), p.x(t + 1.0 / sol.omega)), 1e-12);
}

TEST(ParameterizedOrbit, UnperturbedFamilyIsTheExactFlow) {
  const Model m = hopf(0.0);
  const Solution& sol = solved(0.0);
  EXPECT_EQ(sol.omega, m.omega0);
  EXPECT_EQ(sol.lambda, m.lambda0);
  const Trajectory tr = parameterized_orbit(m, sol, 0.2, 0.3, 0.0, 0.05, 40);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.t(k);
    const auto K = HopfOracle::K(0.2 + t, 0.3 * std::exp(-2.0 * t));
    EXPECT_NEAR(tr.x[k][0], K[0], 1e-13);
    EXPECT_NEAR(tr.x[k][1], K[1], 1e-13);
  }
}

TEST(ParameterizedOrbit, OppositePhasesTraceTheSameCycle) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  // sampling one period on an even grid, a half-period shift maps samples onto samples
  const std::size_t M = 512;
  const double dt = 1.0 / (sol.omega * M);
  const Trajectory a = parameterized_orbit(m, sol, 0.1, 0.0, 0.0, dt, M);
  const Trajectory b = parameterized_orbit(m, sol, 0.6, 0.0, 0.0, dt, M);
  auto directed = [](const Trajectory& p, const Trajectory& q) {
    double h = 0.0;
    for (const auto& x : p.x) {
      double best = INFINITY;
      for (const auto& y : q.x) best = std::min(best, dist(x, y));
      h = std::max(h, best);
    }
    return h;
  };
  EXPECT_LE(std::max(directed(a, b), directed(b, a)), 1e-9);
}

TEST(ParameterizedOrbit, DerivativeMatchesFiniteDifferences) {
  const Model m = hopf(1e-3);
  const Parameterization p(m, solved(1e-3), 0.3, 0.1);
  const double t = 0.4, h = 1e-5;
  const auto [x, dx] = p.x_dx(t);
  for (int c = 0; c < 2; ++c) EXPECT_NEAR(dx[c], (p.x(t + h)[c] - p.x(t - h)[c]) / (2 * h), 1e-8);
}

TEST(ParameterizedOrbit, LeavingTheTailDomainIsAnError) {
  const Model m = hopf(1e-3);
  const Parameterization p(m, solved(1e-3), 0.0, 1.0);
  EXPECT_THROW(p.x(-2.0), Error);
}

TEST(DefectNorm, UnperturbedIdentityIsExact) {
  const Model m = hopf(0.0);
  EXPECT_LE(defect_norm(m, solved(0.0), 0.2, 0.1, 2.0, 200), 1e-9);
}

TEST(DefectNorm, OnCycleDefectIsBoundedByTheZeroResidual) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  ASSERT_TRUE(sol.converged());
  const double e0 = residual_zero(m, sol.omega, sol.W.c[0]).second;
  EXPECT_LE(defect_norm(m, sol, 0.0, 0.0, 2.0, 400), 50.0 * e0);
}

TEST(DefectNorm, CorruptedExponentIsDetected) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  Solution bad = sol;
  bad.lambda *= 1.01;
  const double good = defect_norm(m, sol, 0.0, 0.1, 1.0, 200);
  EXPECT_GE(defect_norm(m, bad, 0.0, 0.1, 1.0, 200), 10.0 * good);
}

TEST(DefectNorm, OnCycleDefectIsPhaseShiftInvariant) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const double th0 = 0.237;
  const Parameterization p(m, sol, 0.0, 0.0), q(m, sol, th0, 0.0);
  for (double t : {0.5, 0.9, 1.6}) EXPECT_NEAR(defect_at(m, p, t), defect_at(m, q, t - th0 / sol.omega), 1e-12);
}

TEST(OracleEquivalence, IntegrationTracksTheParameterization) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const double T = 2.0 / std::abs(sol.lambda);
  for (double th : {0.0, 0.3})
    for (double s : {0.0, 0.1, -0.1}) {
      const Parameterization p(m, sol, th, s);
      const Trajectory tr = sdde_integrate(m, p.history(), T, 1e-3, m.h);
      double worst = 0.0;
      for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, dist(tr.x[k], p.x(tr.t(k))));
      EXPECT_LE(worst, 1e-5) << "theta " << th << " s " << s;
    }
}

TEST(PhaseRateFit, UnperturbedRates) {
  const Model m = hopf(0.0);
  const Solution& sol = solved(0.0);
  const Parameterization p(m, sol, 0.0, 0.1);
  const RateFit f = phase_rate_fit(sdde_integrate(m, p.history(), 12.0, 1e-3, m.h), m, sol);
  EXPECT_NEAR(f.omega_hat, m.omega0, 1e-6);
  EXPECT_NEAR(f.lambda_hat, m.lambda0, 1e-3);
}

TEST(PhaseRateFit, IntegratedRatesMatchTheSolve) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const Parameterization p(m, sol, 0.0, 0.1);
  const RateFit f = phase_rate_fit(sdde_integrate(m, p.history(), 12.0, 1e-3, m.h), m, sol);
  EXPECT_NEAR(f.omega_hat, sol.omega, 1e-5);
  EXPECT_NEAR(f.lambda_hat, sol.lambda, 1e-2);
}

TEST(PhaseRateFit, OnCycleStartCannotGiveLambda) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const Parameterization p(m, sol, 0.0, 0.0);
  const Trajectory tr = sdde_integrate(m, p.history(), 3.0, 1e-3, m.h);
  try {
    phase_rate_fit(tr, m, sol);
    FAIL() << "expected an underflow error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("underflows"), std::string::npos);
  }
  RateFitOptions o;
  o.need_lambda = false;
  EXPECT_NEAR(phase_rate_fit(tr, m, sol, o).omega_hat, sol.omega, 1e-6);
}

TEST(PhaseRateFit, ShortRunHasTooFewCrossings) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const Parameterization p(m, sol, 0.0, 0.0);
  EXPECT_THROW(phase_rate_fit(sdde_integrate(m, p.history(), 0.5, 1e-3, m.h), m, sol), Error);
}

TEST(PhaseCoherence, SameThetaTrajectoriesConvergeAtLambda) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const Parameterization pa(m, sol, 0.3, 0.1), pb(m, sol, 0.3, 0.05);
  const Trajectory a = sdde_integrate(m, pa.history(), 5.0, 1e-3, m.h);
  const Trajectory b = sdde_integrate(m, pb.history(), 5.0, 1e-3, m.h);
  std::vector<double> t, ld, ph;
  for (std::size_t k = 0; k < a.size(); k += 10)
    if (a.t(k) >= 1.0) {
      t.push_back(a.t(k));
      ld.push_back(std::log(dist(a.x[k], b.x[k])));
      ph.push_back(0.3 + sol.omega * a.t(k));
    }
  EXPECT_NEAR(log_slope_fit(t, ld, ph), sol.lambda, 0.02 * std::abs(sol.lambda));
}

TEST(Aposteriori, ConvergedRunIsConsistent) {
  const Model m = hopf(1e-3);
  const Solution& sol = solved(1e-3);
  const json r = aposteriori_report(m, sol);
  EXPECT_TRUE(r.at("certifying").get<bool>());
  ASSERT_EQ(r.at("stages").size(), sol.reports.size());
  for (const auto& st : r.at("stages")) {
    const double mu = st.at("mu_hat").get<double>(), b = st.at("bound").get<double>();
    EXPECT_GE(mu, 0.0);
    EXPECT_LT(mu, 1.0);
    EXPECT_TRUE(std::isfinite(b));
    EXPECT_NEAR(b, mu / (1 - mu) * st.at("d_last").get<double>(), 1e-15 + 1e-12 * b);
  }
  const auto& s = r.at("surrogate");
  EXPECT_EQ(s.at("label"), "surrogate");
  EXPECT_GE(s.at("value").get<double>(), s.at("E0_1").get<double>());
}

TEST(Aposteriori, StrongPerturbationIsNotCertifying) {
  const Model m = hopf(0.5);
  const Solution sol = solve_all(m, small_config());
  EXPECT_FALSE(sol.converged());
  EXPECT_FALSE(aposteriori_report(m, sol).at("certifying").get<bool>());
}

TEST(Aposteriori, BoundCoversAKnownPerturbation) {
  const Model m = hopf(1e-3);
  const SolverConfig cfg = small_config();
  const Solution& sol = solved(1e-3);
  ZeroIterate g{sol.omega, sol.W.c[0]};
  g.Z.comp2 = g.Z.comp2 + PeriodicFn::sample(cfg.modes, [](double th) { return 1e-5 * std::cos(kTwoPi * th); });
  const ZeroIterate first = gamma0_apply(m, g);
  const ZeroSolution z = solve_zero(m, cfg, g);
  ASSERT_TRUE(z.report.converged);
  // first iterate to the re-solved fixed point, against mu/(1 - mu) times the first step
  const double mu = z.report.mu_hat(cfg.noise_floor);
  const double d1 = z.report.distances.front();
  const double err = iterate_distance(first, ZeroIterate{z.omega, z.W0});
  EXPECT_GT(err, 0.0);
  EXPECT_LE(err, mu / (1 - mu) * d1);
}

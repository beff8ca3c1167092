#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "isochron/periodic.hpp"

using namespace isochron;

namespace {

// random trigonometric polynomial of degree < deg, evaluated directly
struct TrigPoly {
  std::vector<double> a, b;
  double c0 = 0.0;
  TrigPoly(int deg, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    c0 = U(rng);
    for (int k = 1; k < deg; ++k) {
      const double decay = std::exp(-0.3 * k);
      a.push_back(U(rng) * decay);
      b.push_back(U(rng) * decay);
    }
  }
  double operator()(double t) const {
    double v = c0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double w = kTwoPi * static_cast<double>(k + 1) * t;
      v += a[k] * std::cos(w) + b[k] * std::sin(w);
    }
    return v;
  }
  double deriv(double t) const {
    double v = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double f = kTwoPi * static_cast<double>(k + 1);
      v += f * (-a[k] * std::sin(f * t) + b[k] * std::cos(f * t));
    }
    return v;
  }
};

double sup_diff(const PeriodicFn& f, const std::function<double(double)>& g) {
  double d = 0.0;
  for (std::size_t m = 0; m < f.size(); ++m)
    d = std::max(d, std::abs(f[m] - g(PeriodicFn::node(m, f.size()))));
  return d;
}

}  // namespace

TEST(MakePeriodic, ZeroConstantAndCosine) {
  const auto z = make_periodic(std::vector<double>(8, 0.0));
  for (auto c : z.coeffs()) EXPECT_EQ(std::abs(c), 0.0);

  const auto one = make_periodic(std::vector<double>(16, 1.0));
  EXPECT_NEAR(one.coeff(0).real(), 1.0, 1e-15);
  for (long k = 1; k <= 8; ++k) EXPECT_LT(std::abs(one.coeff(k)), 1e-15);

  const auto c = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  EXPECT_NEAR(c.coeff(1).real(), 0.5, 1e-14);
  EXPECT_NEAR(c.coeff(-1).real(), 0.5, 1e-14);
  for (long k = -8; k <= 8; ++k)
    if (std::abs(k) != 1) EXPECT_LT(std::abs(c.coeff(k)), 1e-14);
}

TEST(MakePeriodic, RejectsBadInput) {
  EXPECT_THROW(make_periodic(std::vector<double>(12, 0.0)), Error);
  EXPECT_THROW(make_periodic(std::vector<double>(4, 0.0)), Error);
  std::vector<double> v(8, 0.0);
  v[3] = std::nan("");
  EXPECT_THROW(make_periodic(v), Error);
}

TEST(MakePeriodic, RoundTripAndSymmetry) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  std::vector<double> v(64);
  for (double& x : v) x = U(rng);
  const auto f = make_periodic(v);
  for (long k = 1; k < 32; ++k) EXPECT_EQ(f.coeff(-k), std::conj(f.coeff(k)));
  const auto g = PeriodicFn::from_coeffs(f.coeffs());
  for (std::size_t m = 0; m < v.size(); ++m) EXPECT_NEAR(g[m], v[m], 1e-13 * 3.0);
}

TEST(EvalPeriodic, Examples) {
  const auto c = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  EXPECT_NEAR(c.eval(0.125), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(c.eval(0.37), std::cos(kTwoPi * 0.37), 1e-12);
  EXPECT_NEAR(c.eval(1.37), c.eval(0.37), 1e-13);
  EXPECT_NEAR(c.eval(-0.63), c.eval(0.37), 1e-13);
  const auto z = PeriodicFn::constant(8, 0.0);
  EXPECT_EQ(z.eval(0.3), 0.0);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(32);
  for (double& x : v) x = U(rng);
  const auto f = make_periodic(v);
  for (std::size_t m = 0; m < 32; ++m) EXPECT_EQ(f.eval(PeriodicFn::node(m, 32)), v[m]);
}

TEST(EvalPeriodic, InterpolatesBandLimited) {
  const TrigPoly p(20, 11);
  const auto f = PeriodicFn::sample(64, p);
  for (double t = -0.5; t < 1.5; t += 0.0137) EXPECT_NEAR(f.eval(t), p(t), 1e-12);
}

TEST(Differentiate, Examples) {
  const auto c = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  EXPECT_LT(sup_diff(differentiate(c), [](double t) { return -kTwoPi * std::sin(kTwoPi * t); }),
            1e-12);
  EXPECT_LT(differentiate(PeriodicFn::constant(16, 4.0)).sup_norm(), 1e-15);
  const TrigPoly p(12, 5);
  const auto f = PeriodicFn::sample(32, p);
  EXPECT_LT(sup_diff(differentiate(f), [&](double t) { return p.deriv(t); }), 1e-11);
  const auto d2 = differentiate(c, 2);
  EXPECT_LT(sup_diff(d2, [](double t) { return -kTwoPi * kTwoPi * std::cos(kTwoPi * t); }), 1e-11);
}

TEST(Antiderivative, Examples) {
  const auto c = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  auto [m1, G1] = antiderivative_zero_mean(c);
  EXPECT_NEAR(m1, 0.0, 1e-15);
  EXPECT_LT(sup_diff(G1, [](double t) { return std::sin(kTwoPi * t) / kTwoPi; }), 1e-14);

  auto [m2, G2] = antiderivative_zero_mean(PeriodicFn::constant(8, 3.0));
  EXPECT_NEAR(m2, 3.0, 1e-15);
  EXPECT_EQ(G2.sup_norm(), 0.0);

  const auto s = PeriodicFn::sample(16, [](double t) { return std::sin(kTwoPi * t); });
  auto [m3, G3] = antiderivative_zero_mean(s);
  EXPECT_NEAR(m3, 0.0, 1e-15);
  EXPECT_EQ(G3[0], 0.0);
  EXPECT_LT(sup_diff(G3, [](double t) { return (1.0 - std::cos(kTwoPi * t)) / kTwoPi; }), 1e-14);
}

TEST(Antiderivative, DifferentiateInverts) {
  const TrigPoly p(15, 9);
  const auto g = PeriodicFn::sample(64, p);
  auto [mean, G] = antiderivative_zero_mean(g);
  const auto back = differentiate(G);
  for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(back[m], g[m] - mean, 1e-12);
}

TEST(SpectralSolve, Examples) {
  const auto u1 = spectral_solve(PeriodicFn::constant(8, 1.0), 1.0, 2.0);
  for (double v : u1.values()) EXPECT_NEAR(v, 0.5, 1e-15);

  const auto g = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  const auto u2 = spectral_solve(g, 1.0, 2.0);
  const double pi = std::numbers::pi;
  EXPECT_LT(sup_diff(u2,
                     [&](double t) {
                       return (2.0 * std::cos(kTwoPi * t) + 2.0 * pi * std::sin(kTwoPi * t)) /
                              (4.0 + 4.0 * pi * pi);
                     }),
            1e-14);

  EXPECT_EQ(spectral_solve(PeriodicFn::constant(8, 0.0), 1.0, 2.0).sup_norm(), 0.0);
  EXPECT_THROW(spectral_solve(g, 1.0, 1e-14), Error);
}

TEST(SpectralSolve, ExactInverseOnTrigPolynomials) {
  const TrigPoly p(20, 21);
  const auto u = PeriodicFn::sample(64, p);
  for (auto [a, c] : {std::pair{1.3, -2.0}, std::pair{0.7, 5.0}, std::pair{2.0, -0.1}}) {
    const auto g = a * differentiate(u) + c * u;
    const auto back = spectral_solve(g, a, c);
    for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(back[m], u[m], 1e-11);
    // residual contract
    const auto res = a * differentiate(back) + c * back - g;
    EXPECT_LE(res.sup_norm(), 1e-11 * g.sup_norm());
  }
}

TEST(SpectralSolve, MatchesResolventIntegral) {
  // integral_0^inf e^{lambda0 t} g(theta - omega t) dt solves omega u' - lambda0 u = g
  const double lambda0 = -2.0, omega = 1.1;
  const auto g = PeriodicFn::sample(32, [](double t) { return std::cos(kTwoPi * t) + 0.3; });
  const auto u = spectral_solve(g, omega, -lambda0);
  const double th = 0.21;
  double integral = 0.0;
  const double dt = 1e-4;
  for (double t = 0.5 * dt; t < 25.0; t += dt) integral += std::exp(lambda0 * t) * g.eval(th - omega * t) * dt;
  EXPECT_NEAR(u.eval(th), integral, 1e-7);
}

TEST(ComposeShift, Examples) {
  const TrigPoly p(10, 2);
  const auto f = PeriodicFn::sample(32, p);
  const auto same = compose_shift(f, PeriodicFn::constant(32, 0.0));
  for (std::size_t m = 0; m < 32; ++m) EXPECT_NEAR(same[m], f[m], 1e-13);

  const auto c = PeriodicFn::sample(16, [](double t) { return std::cos(kTwoPi * t); });
  const auto q = compose_shift(c, PeriodicFn::constant(16, 0.25));
  EXPECT_LT(sup_diff(q, [](double t) { return -std::sin(kTwoPi * t); }), 1e-12);

  // dense off-grid oracle
  const auto delta = PeriodicFn::sample(32, [](double t) { return 0.1 * std::sin(kTwoPi * t); });
  const auto out = compose_shift(f, delta);
  for (std::size_t m = 0; m < 32; ++m) {
    const double t = PeriodicFn::node(m, 32);
    EXPECT_NEAR(out[m], p(t + 0.1 * std::sin(kTwoPi * t)), 1e-10);
  }
  double worst = 0.0;
  for (int i = 0; i < 4096; ++i) {
    const double t = (i + 0.5) / 4096.0;
    worst = std::max(worst, std::abs(f.eval(t + delta.eval(t)) - p(t + 0.1 * std::sin(kTwoPi * t))));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(ComposeShift, ConstantShiftIsPhaseRotation) {
  const TrigPoly p(12, 4);
  const auto f = PeriodicFn::sample(32, p);
  const double d = 0.137;
  const auto out = compose_shift(f, PeriodicFn::constant(32, d));
  std::vector<cplx> c = f.coeffs();
  for (std::size_t k = 1; k < 16; ++k) {
    c[k] *= std::polar(1.0, kTwoPi * static_cast<double>(k) * d);
    c[32 - k] = std::conj(c[k]);
  }
  c[16] = 0.0;
  const auto rot = PeriodicFn::from_coeffs(c);
  for (std::size_t m = 0; m < 32; ++m) EXPECT_NEAR(out[m], rot[m], 1e-12);
}

TEST(ComposeShift, TorusLiftStaysDegreeOne) {
  TorusLift L{PeriodicFn::sample(32, [](double t) { return 0.05 * std::sin(kTwoPi * t); })};
  EXPECT_DOUBLE_EQ(L.value(0.3 + 1.0) - L.value(0.3), 1.0);
  const auto delta = PeriodicFn::sample(32, [](double t) { return -0.2 + 0.01 * std::cos(kTwoPi * t); });
  const auto out = compose_shift(L, delta);
  for (std::size_t m = 0; m < 32; ++m) {
    const double t = PeriodicFn::node(m, 32);
    const double x = t - 0.2 + 0.01 * std::cos(kTwoPi * t);
    EXPECT_NEAR(out.value_at_node(m), x + 0.05 * std::sin(kTwoPi * x), 1e-13);
  }
}

TEST(C0Distance, Examples) {
  const auto id = PlaneLoop::identity(16);
  EXPECT_EQ(c0_distance(id, id), 0.0);
  PlaneLoop g = id;
  g.comp2 = PeriodicFn::constant(16, 0.25);
  EXPECT_NEAR(c0_distance(id, g), 0.25, 1e-15);
  PlaneLoop f = id;
  f.comp1 = PeriodicFn::sample(16, [](double t) { return 0.1 * std::sin(kTwoPi * t); });
  EXPECT_NEAR(c0_distance(f, id), 0.1, 1e-15);
  EXPECT_NEAR(c0_distance(f.resample(64), id), 0.1, 1e-15);
}

TEST(Properties, Parseval) {
  const TrigPoly p(20, 31);
  const auto f = PeriodicFn::sample(64, p);
  double sc = 0.0, sv = 0.0;
  for (auto c : f.coeffs()) sc += std::norm(c);
  for (double v : f.values()) sv += v * v / 64.0;
  EXPECT_NEAR(sc, sv, 1e-12 * sv);
}

TEST(Properties, GridRefinementCommutes) {
  const TrigPoly p(10, 41);
  const auto f = PeriodicFn::sample(32, p);
  const auto F = PeriodicFn::sample(64, p);
  const auto df = differentiate(f).resample(64);
  const auto dF = differentiate(F);
  for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(df[m], dF[m], 1e-12 * 50);
  const auto s = spectral_solve(f, 1.2, -0.7).resample(64);
  const auto S = spectral_solve(F, 1.2, -0.7);
  for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(s[m], S[m], 1e-12);
  const auto delta = PeriodicFn::sample(32, [](double t) { return 0.1 * std::cos(kTwoPi * t); });
  const auto c = compose_shift(f, delta).resample(64);
  const auto C = compose_shift(F, delta.resample(64));
  for (std::size_t m = 0; m < 64; m += 2) EXPECT_NEAR(c[m], C[m], 1e-12);
}

TEST(Properties, DealiasZeroesTopThird) {
  const TrigPoly p(32, 51);
  const auto f = PeriodicFn::sample(64, p).dealiased();
  for (long k = 22; k <= 32; ++k) EXPECT_EQ(std::abs(f.coeff(k)), 0.0);
  EXPECT_GT(std::abs(f.coeff(21)), 0.0);
}

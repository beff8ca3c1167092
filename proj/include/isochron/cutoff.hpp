#pragma once

// C-infinity cut-off: 1 on |x| <= a1, 0 on |x| >= a2, a smoothstep between.
// Generic over double, Dual and Series so extensions can be jet-expanded.

#include <cmath>

#include "isochron/dual.hpp"
#include "isochron/error.hpp"
#include "isochron/series.hpp"

namespace isochron {

struct Cutoff {
  double a1 = 0.5;
  double a2 = 1.0;

  void validate() const {
    if (!(a1 > 0.0 && a2 > a1 && std::isfinite(a2)))
      fail(ErrorKind::invalid_input, "cutoff requires 0 < a1 < a2");
  }

  /// Exactly 1 on the plateau and exactly 0 off the support (all derivatives too).
  template <class T>
  T phi(const T& x) const {
    using std::exp;
    const double x0 = value_of(x);
    const double ax0 = std::abs(x0);
    if (ax0 <= a1) return constant_like(x, 1.0);
    if (ax0 >= a2) return constant_like(x, 0.0);
    const T ax = x0 < 0.0 ? -x : x;
    const T u = (constant_like(x, a2) - ax) * (1.0 / (a2 - a1));
    const T one = constant_like(x, 1.0);
    const T qa = exp(-(one / u));
    const T qb = exp(-(one / (one - u)));
    return qa / (qa + qb);
  }

  double phi_prime(double x) const {
    return phi(Dual<double, 1>::seed(x, 0)).d[0];
  }

  /// True when phi vanishes identically near x.
  bool outside(double x) const { return std::abs(x) >= a2; }
};

inline double cutoff_phi(const Cutoff& c, double x) { return c.phi(x); }
inline double cutoff_phi_prime(const Cutoff& c, double x) { return c.phi_prime(x); }

}  // namespace isochron

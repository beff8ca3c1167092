#pragma once

// Truncated power series in one variable with double coefficients.
// Elementary functions use the usual O(N^2) recurrences rather than
// expanding Faa di Bruno combinatorially.

#include <cmath>
#include <cstddef>
#include <vector>

#include "isochron/error.hpp"

namespace isochron {

class Series {
 public:
  Series() = default;
  explicit Series(std::size_t order, double c0 = 0.0) : c_(order, 0.0) {
    if (order) c_[0] = c0;
  }
  explicit Series(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

  /// The series c + s (the expansion variable itself shifted by c).
  static Series variable(std::size_t order, double c0) {
    Series s(order, c0);
    if (order > 1) s.c_[1] = 1.0;
    return s;
  }

  std::size_t order() const { return c_.size(); }
  double operator[](std::size_t j) const { return c_[j]; }
  double& operator[](std::size_t j) { return c_[j]; }
  double value() const { return c_.empty() ? 0.0 : c_[0]; }
  const std::vector<double>& coeffs() const { return c_; }

  /// Evaluates the truncated polynomial at s.
  double at(double s) const {
    double v = 0.0;
    for (std::size_t j = c_.size(); j-- > 0;) v = v * s + c_[j];
    return v;
  }

  Series& operator+=(const Series& o) {
    check(o);
    for (std::size_t j = 0; j < c_.size(); ++j) c_[j] += o.c_[j];
    return *this;
  }
  Series& operator-=(const Series& o) {
    check(o);
    for (std::size_t j = 0; j < c_.size(); ++j) c_[j] -= o.c_[j];
    return *this;
  }
  Series& operator*=(double k) {
    for (double& x : c_) x *= k;
    return *this;
  }

  friend Series operator+(Series a, const Series& b) { return a += b; }
  friend Series operator-(Series a, const Series& b) { return a -= b; }
  friend Series operator-(Series a) {
    for (double& x : a.c_) x = -x;
    return a;
  }
  friend Series operator+(Series a, double k) {
    if (a.order()) a.c_[0] += k;
    return a;
  }
  friend Series operator+(double k, Series a) { return std::move(a) + k; }
  friend Series operator-(Series a, double k) {
    if (a.order()) a.c_[0] -= k;
    return a;
  }
  friend Series operator-(double k, const Series& a) { return -a + k; }
  friend Series operator*(Series a, double k) { return a *= k; }
  friend Series operator*(double k, Series a) { return a *= k; }

  friend Series operator*(const Series& a, const Series& b) {
    a.check(b);
    const std::size_t n = a.order();
    Series r(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (a.c_[i] == 0.0) continue;
      for (std::size_t j = 0; i + j < n; ++j) r.c_[i + j] += a.c_[i] * b.c_[j];
    }
    return r;
  }

  friend Series operator/(const Series& a, const Series& b) {
    a.check(b);
    if (b.c_.empty() || b.c_[0] == 0.0) fail(ErrorKind::numerical, "series division by zero");
    const std::size_t n = a.order();
    Series q(n);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = a.c_[j];
      for (std::size_t k = 1; k <= j; ++k) acc -= b.c_[k] * q.c_[j - k];
      q.c_[j] = acc / b.c_[0];
    }
    return q;
  }
  friend Series operator/(const Series& a, double k) { return a * (1.0 / k); }
  friend Series operator/(double k, const Series& b) { return Series(b.order(), k) / b; }

  friend Series exp(const Series& u) {
    const std::size_t n = u.order();
    Series f(n);
    if (!n) return f;
    f.c_[0] = std::exp(u.c_[0]);
    for (std::size_t j = 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 1; k <= j; ++k) acc += static_cast<double>(k) * u.c_[k] * f.c_[j - k];
      f.c_[j] = acc / static_cast<double>(j);
    }
    return f;
  }

  /// sin and cos are generated together by their coupled recurrence.
  friend void sincos(const Series& u, Series& s, Series& c) {
    const std::size_t n = u.order();
    s = Series(n);
    c = Series(n);
    if (!n) return;
    s.c_[0] = std::sin(u.c_[0]);
    c.c_[0] = std::cos(u.c_[0]);
    for (std::size_t j = 1; j < n; ++j) {
      double as = 0.0, ac = 0.0;
      for (std::size_t k = 1; k <= j; ++k) {
        const double ku = static_cast<double>(k) * u.c_[k];
        as += ku * c.c_[j - k];
        ac -= ku * s.c_[j - k];
      }
      s.c_[j] = as / static_cast<double>(j);
      c.c_[j] = ac / static_cast<double>(j);
    }
  }
  friend Series sin(const Series& u) {
    Series s, c;
    sincos(u, s, c);
    return s;
  }
  friend Series cos(const Series& u) {
    Series s, c;
    sincos(u, s, c);
    return c;
  }

  friend Series sqrt(const Series& u) {
    const std::size_t n = u.order();
    Series r(n);
    if (!n) return r;
    if (!(u.c_[0] > 0.0)) fail(ErrorKind::numerical, "series sqrt of non-positive value");
    r.c_[0] = std::sqrt(u.c_[0]);
    for (std::size_t j = 1; j < n; ++j) {
      double acc = u.c_[j];
      for (std::size_t k = 1; k < j; ++k) acc -= r.c_[k] * r.c_[j - k];
      r.c_[j] = acc / (2.0 * r.c_[0]);
    }
    return r;
  }

  friend Series log(const Series& u) {
    const std::size_t n = u.order();
    Series l(n);
    if (!n) return l;
    if (!(u.c_[0] > 0.0)) fail(ErrorKind::numerical, "series log of non-positive value");
    l.c_[0] = std::log(u.c_[0]);
    for (std::size_t j = 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 1; k < j; ++k) acc += static_cast<double>(k) * l.c_[k] * u.c_[j - k];
      l.c_[j] = (u.c_[j] - acc / static_cast<double>(j)) / u.c_[0];
    }
    return l;
  }

 private:
  void check(const Series& o) const {
    if (o.c_.size() != c_.size()) fail(ErrorKind::invalid_input, "series orders differ");
  }

  std::vector<double> c_;
};

inline double value_of(const Series& s) { return s.value(); }

}  // namespace isochron

#pragma once

// Forward-mode dual numbers carrying M directional derivatives over a base
// type T. T may itself be a Series, which is how Jacobians of jets are built.

#include <array>
#include <cmath>
#include <cstddef>

#include "isochron/series.hpp"

namespace isochron {

/// A value shaped like `like` holding the constant c (Series need an order).
inline double constant_like(double, double c) { return c; }
inline Series constant_like(const Series& like, double c) { return Series(like.order(), c); }

template <class T, std::size_t M>
struct Dual {
  T v{};
  std::array<T, M> d{};

  Dual() = default;
  Dual(T value, std::array<T, M> grad) : v(std::move(value)), d(std::move(grad)) {}

  /// Constant with zero derivatives.
  static Dual constant(const T& value) {
    Dual r;
    r.v = value;
    for (auto& x : r.d) x = constant_like(value, 0.0);
    return r;
  }
  /// Independent variable number i.
  static Dual seed(const T& value, std::size_t i) {
    Dual r = constant(value);
    r.d[i] = constant_like(value, 1.0);
    return r;
  }

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v + b.v;
    for (std::size_t i = 0; i < M; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v - b.v;
    for (std::size_t i = 0; i < M; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual operator-(const Dual& a) {
    Dual r;
    r.v = -a.v;
    for (std::size_t i = 0; i < M; ++i) r.d[i] = -a.d[i];
    return r;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v * b.v;
    for (std::size_t i = 0; i < M; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual r;
    r.v = a.v / b.v;
    const T inv = constant_like(b.v, 1.0) / b.v;
    for (std::size_t i = 0; i < M; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
  friend Dual operator+(Dual a, double c) {
    a.v = a.v + c;
    return a;
  }
  friend Dual operator+(double c, Dual a) { return std::move(a) + c; }
  friend Dual operator-(Dual a, double c) {
    a.v = a.v - c;
    return a;
  }
  friend Dual operator-(double c, const Dual& a) { return -a + c; }
  friend Dual operator*(Dual a, double c) {
    a.v = a.v * c;
    for (auto& x : a.d) x = x * c;
    return a;
  }
  friend Dual operator*(double c, Dual a) { return std::move(a) * c; }
  friend Dual operator/(const Dual& a, double c) { return a * (1.0 / c); }

  friend Dual chain(const Dual& a, T f, const T& df) {
    Dual r;
    r.v = std::move(f);
    for (std::size_t i = 0; i < M; ++i) r.d[i] = df * a.d[i];
    return r;
  }
  friend Dual sin(const Dual& a) {
    using std::cos;
    using std::sin;
    return chain(a, sin(a.v), cos(a.v));
  }
  friend Dual cos(const Dual& a) {
    using std::cos;
    using std::sin;
    return chain(a, cos(a.v), -sin(a.v));
  }
  friend Dual exp(const Dual& a) {
    using std::exp;
    T e = exp(a.v);
    return chain(a, e, e);
  }
  friend Dual sqrt(const Dual& a) {
    using std::sqrt;
    T r = sqrt(a.v);
    return chain(a, r, constant_like(a.v, 0.5) / r);
  }
  friend Dual log(const Dual& a) {
    using std::log;
    return chain(a, log(a.v), constant_like(a.v, 1.0) / a.v);
  }
};

template <class T, std::size_t M>
Dual<T, M> constant_like(const Dual<T, M>& like, double c) {
  return Dual<T, M>::constant(constant_like(like.v, c));
}

inline double value_of(double x) { return x; }
template <class T, std::size_t M>
double value_of(const Dual<T, M>& x) {
  return value_of(x.v);
}

}  // namespace isochron

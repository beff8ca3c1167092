#pragma once

// Problem data in (theta, s) coordinates: frequency, Floquet exponent,
// perturbation Y(u, v, eps), delay rho(theta, s) and the cut-off. A model is
// either written directly in these coordinates or derived from a planar
// Cartesian SDDE together with its known conjugacy K.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isochron/cutoff.hpp"
#include "isochron/dual.hpp"
#include "isochron/error.hpp"
#include "isochron/expr.hpp"
#include "isochron/quadrature.hpp"

namespace isochron {

using json = nlohmann::json;

inline const std::vector<std::string>& y_vars() {
  static const std::vector<std::string> v{"u1", "u2", "v1", "v2", "eps"};
  return v;
}
inline const std::vector<std::string>& rho_vars() {
  static const std::vector<std::string> v{"th", "s"};
  return v;
}
inline const std::vector<std::string>& x_vars() {
  static const std::vector<std::string> v{"x1", "x2", "y1", "y2"};
  return v;
}
inline const std::vector<std::string>& r_vars() {
  static const std::vector<std::string> v{"x1", "x2"};
  return v;
}

// Gauss nodes for the segment average in Cartesian Y; exact for X of degree <= 13 in y.
inline constexpr int kSegmentNodes = 7;

class Model {
 public:
  enum class Kind { coords, cartesian };

  Kind kind = Kind::coords;
  double omega0 = 1.0;
  double lambda0 = -1.0;
  double eps = 0.0;
  double h = 0.0;
  Cutoff cutoff;

  // coords
  std::array<Expr, 2> Y;
  Expr rho;
  // cartesian
  std::array<Expr, 2> X;
  Expr r;
  std::array<Expr, 2> K;

  std::vector<std::string> warnings;

  void validate() const {
    if (!(omega0 > 0.0) || !std::isfinite(omega0))
      fail(ErrorKind::invalid_input, "omega0 must be positive");
    if (!(lambda0 < 0.0) || !std::isfinite(lambda0))
      fail(ErrorKind::invalid_input, "lambda0 must be negative");
    if (!(eps >= 0.0) || !std::isfinite(eps))
      fail(ErrorKind::invalid_input, "eps must be non-negative");
    if (!(h >= 0.0) || !std::isfinite(h)) fail(ErrorKind::invalid_input, "h must be non-negative");
    cutoff.validate();
  }

  /// Y(u, v) at the model's eps; T is any supported number type.
  template <class T>
  std::array<T, 2> evalY(const T& u1, const T& u2, const T& v1, const T& v2) const {
    if (kind == Kind::coords) {
      const T e = constant_like(u1, eps);
      const std::array<T, 5> env{u1, u2, v1, v2, e};
      return {evaluate<T>(Y[0], env, u1), evaluate<T>(Y[1], env, u1)};
    }
    return cartesian_Y(u1, u2, v1, v2);
  }

  /// Raw delay rho = r o K at (theta, s), without cut-off.
  template <class T>
  T eval_rho(const T& th, const T& s) const {
    if (kind == Kind::coords) {
      const std::array<T, 2> env{th, s};
      return evaluate<T>(rho, env, th);
    }
    const auto k = evalK(th, s);
    const std::array<T, 2> env{k[0], k[1]};
    return evaluate<T>(r, env, th);
  }

  /// Extended delay rho(theta, s) * phi(s); rho is not evaluated where phi = 0.
  template <class T>
  T rho_bar(const T& th, const T& s) const {
    if (cutoff.outside(value_of(s))) return constant_like(th, 0.0);
    T v = eval_rho(th, s) * cutoff.phi(s);
    check_rho(value_of(v));
    return v;
  }

  void check_rho(double v) const {
    const double tol = 1e-9 * (1.0 + h);
    if (v < -tol || v > h + tol)
      fail(ErrorKind::domain, "delay " + std::to_string(v) + " outside [0, h] with h = " +
                                  std::to_string(h));
  }

  template <class T>
  std::array<T, 2> evalK(const T& th, const T& s) const {
    const std::array<T, 2> env{th, s};
    return {evaluate<T>(K[0], env, th), evaluate<T>(K[1], env, th)};
  }

  /// X(x, y) for Cartesian models.
  template <class T>
  std::array<T, 2> evalX(const std::array<T, 2>& x, const std::array<T, 2>& y) const {
    const std::array<T, 4> env{x[0], x[1], y[0], y[1]};
    return {evaluate<T>(X[0], env, x[0]), evaluate<T>(X[1], env, x[0])};
  }

  /// Lag r(x) of a Cartesian model.
  template <class T>
  T eval_r(const std::array<T, 2>& x) const {
    if (kind != Kind::cartesian) fail(ErrorKind::invalid_input, "r(x) needs a Cartesian model");
    const std::array<T, 2> env{x[0], x[1]};
    return evaluate<T>(r, env, x[0]);
  }

  /// DK(theta, s) as rows [dK_i/dtheta, dK_i/ds].
  template <class T>
  std::array<std::array<T, 2>, 2> evalDK(const T& th, const T& s) const {
    using D = Dual<T, 2>;
    const auto k = evalK(D::seed(th, 0), D::seed(s, 1));
    return {{{k[0].d[0], k[0].d[1]}, {k[1].d[0], k[1].d[1]}}};
  }

  /// max |X(K, 0) - DK (omega0, lambda0 s)| over an m x q grid with s in [-smax, smax].
  double conjugacy_residual(std::size_t m, std::size_t q, double smax) const {
    if (kind != Kind::cartesian) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double th = static_cast<double>(i) / static_cast<double>(m);
      for (std::size_t j = 0; j < q; ++j) {
        const double s =
            q == 1 ? 0.0 : -smax + 2.0 * smax * static_cast<double>(j) / static_cast<double>(q - 1);
        const auto k = evalK(th, s);
        const auto dk = evalDK(th, s);
        const auto x0 = evalX<double>(k, {0.0, 0.0});
        for (int c = 0; c < 2; ++c) {
          const double rhs = dk[c][0] * omega0 + dk[c][1] * lambda0 * s;
          worst = std::max(worst, std::abs(x0[c] - rhs));
        }
      }
    }
    return worst;
  }

 private:
  template <class T>
  std::array<T, 2> cartesian_Y(const T& u1, const T& u2, const T& v1, const T& v2) const {
    const auto ku = evalK(u1, u2);
    const auto kv = evalK(v1, v2);
    // [X(K(u), eps K(v)) - X(K(u), 0)] / eps written as the mean of the
    // directional derivative along the segment, which avoids the cancellation
    using D = Dual<T, 1>;
    const std::array<D, 2> x{D::constant(ku[0]), D::constant(ku[1])};
    const GaussLegendre& g = gauss_legendre(eps > 0.0 ? kSegmentNodes : 1);
    std::array<T, 2> p{constant_like(u1, 0.0), constant_like(u1, 0.0)};
    for (std::size_t q = 0; q < g.x.size(); ++q) {
      const double tau = eps * 0.5 * (1.0 + g.x[q]);
      const std::array<D, 2> y{D(kv[0] * tau, {kv[0]}), D(kv[1] * tau, {kv[1]})};
      const auto dx = evalX<D>(x, y);
      p[0] = p[0] + dx[0].d[0] * (0.5 * g.w[q]);
      p[1] = p[1] + dx[1].d[0] * (0.5 * g.w[q]);
    }
    const auto dk = evalDK(u1, u2);
    const T det = dk[0][0] * dk[1][1] - dk[0][1] * dk[1][0];
    if (!(std::abs(value_of(det)) >= 1e-8)) fail(ErrorKind::numerical, "singular DK");
    const T inv = constant_like(det, 1.0) / det;
    return {(dk[1][1] * p[0] - dk[0][1] * p[1]) * inv, (dk[0][0] * p[1] - dk[1][0] * p[0]) * inv};
  }
};

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.contains(key)) fail(ErrorKind::invalid_input, ptr + "/" + key + ": missing field");
  return j.at(key);
}

inline double number_at(const json& j, const std::string& key, const std::string& ptr) {
  const json& v = require(j, key, ptr);
  if (!v.is_number()) fail(ErrorKind::invalid_input, ptr + "/" + key + ": expected a number");
  return v.get<double>();
}

inline Expr expr_at(const json& v, const std::string& ptr, const std::vector<std::string>& vars) {
  if (!v.is_string()) fail(ErrorKind::invalid_input, ptr + ": expected an expression string");
  try {
    return parse_expr(v.get<std::string>(), vars);
  } catch (const Error& e) {
    fail(ErrorKind::invalid_input, ptr + ": " + e.what());
  }
}

inline std::array<Expr, 2> pair_at(const json& j, const std::string& key, const std::string& ptr,
                                   const std::vector<std::string>& vars) {
  const json& v = require(j, key, ptr);
  if (!v.is_array() || v.size() != 2)
    fail(ErrorKind::invalid_input, ptr + "/" + key + ": expected an array of two expressions");
  return {expr_at(v[0], ptr + "/" + key + "/0", vars), expr_at(v[1], ptr + "/" + key + "/1", vars)};
}

}  // namespace detail

inline Model model_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::invalid_input, ": model must be a JSON object");
  Model m;
  const std::string type = j.value("type", std::string("coords"));
  if (type == "coords") m.kind = Model::Kind::coords;
  else if (type == "cartesian") m.kind = Model::Kind::cartesian;
  else fail(ErrorKind::invalid_input, "/type: expected \"coords\" or \"cartesian\"");
  m.omega0 = detail::number_at(j, "omega0", "");
  m.lambda0 = detail::number_at(j, "lambda0", "");
  m.eps = detail::number_at(j, "eps", "");
  m.h = detail::number_at(j, "h", "");
  if (j.contains("cutoff")) {
    const json& c = j.at("cutoff");
    if (!c.is_object()) fail(ErrorKind::invalid_input, "/cutoff: expected an object");
    m.cutoff.a1 = detail::number_at(c, "a1", "/cutoff");
    m.cutoff.a2 = detail::number_at(c, "a2", "/cutoff");
  }
  m.validate();
  if (m.kind == Model::Kind::coords) {
    m.Y = detail::pair_at(j, "Y", "", y_vars());
    m.rho = detail::expr_at(detail::require(j, "rho", ""), "/rho", rho_vars());
    if (m.Y[0].uses_division() || m.Y[1].uses_division())
      m.warnings.push_back("Y contains division; analyticity on the working domain is not checked");
  } else {
    m.X = detail::pair_at(j, "X", "", x_vars());
    m.r = detail::expr_at(detail::require(j, "r", ""), "/r", r_vars());
    m.K = detail::pair_at(j, "K", "", rho_vars());
    if (m.X[0].uses_division() || m.X[1].uses_division())
      m.warnings.push_back("X contains division; analyticity on the working domain is not checked");
    // spot checks on the interior of the working domain
    const double smax = 0.98 * m.cutoff.a2;
    for (int i = 0; i < 32; ++i) {
      for (int k = 0; k < 17; ++k) {
        const double th = i / 32.0;
        const double s = -smax + 2.0 * smax * k / 16.0;
        const auto dk = m.evalDK(th, s);
        const double det = dk[0][0] * dk[1][1] - dk[0][1] * dk[1][0];
        if (!(std::abs(det) >= 1e-8))
          fail(ErrorKind::invalid_input, "DK is singular on the working domain");
        const double rv = m.eval_rho(th, s) * m.cutoff.phi(s);
        if (rv < 0.0 || rv > m.h * (1.0 + 1e-12)) {
          m.warnings.push_back("extended delay r(K) phi leaves [0, h] on the spot-check grid");
          i = 32;
          break;
        }
      }
    }
    const double res = m.conjugacy_residual(32, 17, 0.9 * m.cutoff.a2);
    if (res > 1e-8)
      m.warnings.push_back("K does not conjugate X(., 0) to the model dynamics (residual " +
                           std::to_string(res) + ")");
  }
  return m;
}

inline json model_to_json(const Model& m) {
  json j;
  j["type"] = m.kind == Model::Kind::coords ? "coords" : "cartesian";
  j["omega0"] = m.omega0;
  j["lambda0"] = m.lambda0;
  j["eps"] = m.eps;
  j["h"] = m.h;
  j["cutoff"] = {{"a1", m.cutoff.a1}, {"a2", m.cutoff.a2}};
  if (m.kind == Model::Kind::coords) {
    j["Y"] = {m.Y[0].source(), m.Y[1].source()};
    j["rho"] = m.rho.source();
  } else {
    j["X"] = {m.X[0].source(), m.X[1].source()};
    j["r"] = m.r.source();
    j["K"] = {m.K[0].source(), m.K[1].source()};
  }
  return j;
}

/// Canonical text form: sorted keys, two-space indent, trailing newline.
inline std::string model_to_string(const Model& m) { return model_to_json(m).dump(2) + "\n"; }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_input, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_input, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::invalid_input, "write failed for " + path);
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_input, what + ": " + e.what());
  }
}

inline Model load_model(const std::string& path) {
  return model_from_json(parse_json_text(read_text_file(path), path));
}

inline void save_model(const Model& m, const std::string& path) {
  write_text_file(path, model_to_string(m));
}

/// 64-bit FNV-1a of the canonical model text.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string model_fingerprint(const Model& m) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(model_to_json(m).dump())));
  return buf;
}

/// The Cartesian model re-expressed in (theta, s) coordinates. Evaluation
/// already dispatches on kind, so this only validates and copies.
inline Model cartesian_to_coords(const Model& cm) {
  if (cm.kind != Model::Kind::cartesian)
    fail(ErrorKind::invalid_input, "cartesian_to_coords needs a cartesian model");
  cm.validate();
  return cm;
}

}  // namespace isochron

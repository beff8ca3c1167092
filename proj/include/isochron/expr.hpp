#pragma once

// A small analytic-expression language. Expressions are parsed once into a
// flat AST and evaluated over any number type that supplies +, -, *, /, sin,
// cos, exp, sqrt and log (double, Dual, Series, Dual<Series>).
//
// Grammar (standard precedence, left associative):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' integer)*
//   primary := number | name | name '(' expr ')' | '(' expr ')'

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isochron/dual.hpp"
#include "isochron/error.hpp"
#include "isochron/series.hpp"

namespace isochron {

enum class Func { sin, cos, exp, sqrt, log };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::exp: return "exp";
    case Func::sqrt: return "sqrt";
    case Func::log: return "log";
  }
  return "?";
}

class Expr {
 public:
  enum class Kind { number, variable, add, sub, mul, div, pow, neg, call };

  struct Node {
    Kind kind;
    int a = -1;        // first child (or variable index)
    int b = -1;        // second child
    double number = 0.0;
    int exponent = 0;  // for pow
    Func func = Func::sin;
  };

  Expr() = default;

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return root_; }
  const std::vector<std::string>& variables() const { return vars_; }
  const std::string& source() const { return source_; }
  bool empty() const { return nodes_.empty(); }

  bool uses_division() const {
    for (const auto& n : nodes_)
      if (n.kind == Kind::div) return true;
    return false;
  }
  bool uses_variable(std::size_t i) const {
    for (const auto& n : nodes_)
      if (n.kind == Kind::variable && n.a == static_cast<int>(i)) return true;
    return false;
  }

  /// Structural equality (same tree shape, numbers and variable indices).
  bool same_structure(const Expr& o) const { return same(root_, o, o.root_); }

  /// Fully parenthesized text that re-parses to the same structure.
  std::string print() const { return print(root_); }

  friend Expr parse_expr(std::string_view text, std::vector<std::string> vars);

 private:
  bool same(int i, const Expr& o, int j) const {
    const Node& x = nodes_[i];
    const Node& y = o.nodes_[j];
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case Kind::number: return x.number == y.number;
      case Kind::variable: return x.a == y.a;
      case Kind::pow: return x.exponent == y.exponent && same(x.a, o, y.a);
      case Kind::neg: return same(x.a, o, y.a);
      case Kind::call: return x.func == y.func && same(x.a, o, y.a);
      default: return same(x.a, o, y.a) && same(x.b, o, y.b);
    }
  }

  std::string print(int i) const {
    const Node& n = nodes_[i];
    switch (n.kind) {
      case Kind::number: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.number);
        return buf;
      }
      case Kind::variable: return vars_[n.a];
      case Kind::add: return "(" + print(n.a) + " + " + print(n.b) + ")";
      case Kind::sub: return "(" + print(n.a) + " - " + print(n.b) + ")";
      case Kind::mul: return "(" + print(n.a) + " * " + print(n.b) + ")";
      case Kind::div: return "(" + print(n.a) + " / " + print(n.b) + ")";
      case Kind::pow: return "(" + print(n.a) + "^" + std::to_string(n.exponent) + ")";
      case Kind::neg: return "(-" + print(n.a) + ")";
      case Kind::call: return std::string(func_name(n.func)) + "(" + print(n.a) + ")";
    }
    return {};
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  std::vector<std::string> vars_;
  std::string source_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars, std::vector<Expr::Node>& out)
      : text_(text), vars_(vars), out_(out) {}

  int parse() {
    skip();
    if (pos_ >= text_.size()) error("empty expression");
    const int r = expr();
    skip();
    if (pos_ != text_.size()) error("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return r;
  }

 private:
  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::invalid_input,
         "syntax error at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Expr::Node n) {
    out_.push_back(n);
    return static_cast<int>(out_.size()) - 1;
  }
  int binary(Expr::Kind k, int a, int b) {
    Expr::Node n{k};
    n.a = a;
    n.b = b;
    return push(n);
  }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) lhs = binary(Expr::Kind::add, lhs, term());
      else if (accept('-')) lhs = binary(Expr::Kind::sub, lhs, term());
      else return lhs;
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      if (accept('*')) lhs = binary(Expr::Kind::mul, lhs, unary());
      else if (accept('/')) lhs = binary(Expr::Kind::div, lhs, unary());
      else return lhs;
    }
  }

  int unary() {
    if (accept('-')) {
      Expr::Node n{Expr::Kind::neg};
      n.a = unary();
      return push(n);
    }
    return power();
  }

  int power() {
    int base = primary();
    while (accept('^')) base = exponent(base);
    return base;
  }

  int exponent(int base) {
    skip();
    const bool paren = accept('(');
    skip();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '-') error("negative exponents are not supported");
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) error("expected a non-negative integer exponent");
    const int e = std::stoi(std::string(text_.substr(start, pos_ - start)));
    if (paren && !accept(')')) error("expected ')'");
    Expr::Node n{Expr::Kind::pow};
    n.a = base;
    n.exponent = e;
    return push(n);
  }

  int primary() {
    skip();
    if (pos_ >= text_.size()) error("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int r = expr();
      if (!accept(')')) error("expected ')'");
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    error("unexpected character '" + std::string(1, c) + "'");
  }

  int number() {
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      error("malformed number");
    }
    pos_ += used;
    Expr::Node n{Expr::Kind::number};
    n.number = v;
    return push(n);
  }

  int name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    skip();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      static const std::pair<const char*, Func> table[] = {
          {"sin", Func::sin}, {"cos", Func::cos}, {"exp", Func::exp},
          {"sqrt", Func::sqrt}, {"log", Func::log}};
      for (const auto& [fname, f] : table) {
        if (id == fname) {
          ++pos_;
          Expr::Node n{Expr::Kind::call};
          n.func = f;
          n.a = expr();
          if (!accept(')')) error("expected ')'");
          return push(n);
        }
      }
      pos_ = start;
      error("unknown function '" + id + "'");
    }
    if (id == "pi") {
      Expr::Node n{Expr::Kind::number};
      n.number = std::numbers::pi;
      return push(n);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == id) {
        Expr::Node n{Expr::Kind::variable};
        n.a = static_cast<int>(i);
        return push(n);
      }
    }
    pos_ = start;
    error("unknown identifier '" + id + "'");
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::vector<Expr::Node>& out_;
  std::size_t pos_ = 0;
};

inline void check_divisor(double d) {
  if (d == 0.0) fail(ErrorKind::numerical, "division by zero");
}
inline void check_divisor(const Series& d) {
  if (d.order() == 0 || std::abs(d[0]) < 1e-10)
    fail(ErrorKind::numerical, "jet division: denominator constant term too small");
}
template <class T, std::size_t M>
void check_divisor(const Dual<T, M>& d) {
  check_divisor(d.v);
}

template <class T>
T eval_node(const Expr& e, int i, std::span<const T> vars, const T& like) {
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  const Expr::Node& n = e.nodes()[i];
  switch (n.kind) {
    case Expr::Kind::number: return constant_like(like, n.number);
    case Expr::Kind::variable: return vars[static_cast<std::size_t>(n.a)];
    case Expr::Kind::add: return eval_node(e, n.a, vars, like) + eval_node(e, n.b, vars, like);
    case Expr::Kind::sub: return eval_node(e, n.a, vars, like) - eval_node(e, n.b, vars, like);
    case Expr::Kind::mul: return eval_node(e, n.a, vars, like) * eval_node(e, n.b, vars, like);
    case Expr::Kind::div: {
      T den = eval_node(e, n.b, vars, like);
      check_divisor(den);
      return eval_node(e, n.a, vars, like) / den;
    }
    case Expr::Kind::neg: return -eval_node(e, n.a, vars, like);
    case Expr::Kind::pow: {
      T base = eval_node(e, n.a, vars, like);
      T acc = constant_like(like, 1.0);
      for (int k = n.exponent; k > 0; k >>= 1) {
        if (k & 1) acc = acc * base;
        if (k > 1) base = base * base;
      }
      return acc;
    }
    case Expr::Kind::call: {
      T x = eval_node(e, n.a, vars, like);
      switch (n.func) {
        case Func::sin: return sin(x);
        case Func::cos: return cos(x);
        case Func::exp: return exp(x);
        case Func::sqrt:
          if (!(value_of(x) >= 0.0)) fail(ErrorKind::numerical, "sqrt of a negative value");
          return sqrt(x);
        case Func::log:
          if (!(value_of(x) > 0.0)) fail(ErrorKind::numerical, "log of a non-positive value");
          return log(x);
      }
    }
  }
  fail(ErrorKind::invalid_input, "corrupt expression node");
}

}  // namespace detail

/// Parses `text` over the declared variable names.
inline Expr parse_expr(std::string_view text, std::vector<std::string> vars) {
  Expr e;
  e.vars_ = std::move(vars);
  e.source_ = std::string(text);
  detail::Parser p(text, e.vars_, e.nodes_);
  e.root_ = p.parse();
  return e;
}

/// Evaluates over any supported number type; `like` shapes constants.
template <class T>
T evaluate(const Expr& e, std::span<const T> vars, const T& like) {
  if (vars.size() < e.variables().size())
    fail(ErrorKind::invalid_input, "unbound variable in expression '" + e.source() + "'");
  T r = detail::eval_node<T>(e, e.root(), vars, like);
  if (!std::isfinite(value_of(r)))
    fail(ErrorKind::numerical, "non-finite value from expression '" + e.source() + "'");
  return r;
}

inline double eval_expr(const Expr& e, std::span<const double> vars) {
  return evaluate<double>(e, vars, 0.0);
}

/// Value and directional derivative along `seed`.
inline std::pair<double, double> eval_dual(const Expr& e, std::span<const double> vars,
                                           std::span<const double> seed) {
  std::vector<Dual<double, 1>> dv(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) dv[i] = Dual<double, 1>({vars[i]}, {seed[i]});
  const auto r = evaluate<Dual<double, 1>>(e, dv, Dual<double, 1>::constant(0.0));
  return {r.v, r.d[0]};
}

/// Value and full gradient with respect to every declared variable.
template <std::size_t M>
std::pair<double, std::array<double, M>> eval_gradient(const Expr& e, std::span<const double> vars) {
  std::vector<Dual<double, M>> dv(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) dv[i] = Dual<double, M>::seed(vars[i], i);
  const auto r = evaluate<Dual<double, M>>(e, dv, Dual<double, M>::constant(0.0));
  return {r.v, r.d};
}

}  // namespace isochron

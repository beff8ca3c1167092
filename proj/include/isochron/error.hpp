#pragma once

#include <stdexcept>
#include <string>

namespace isochron {

/// Categories used by the CLI to map failures onto exit codes.
enum class ErrorKind {
  invalid_input,   // bad arguments, schema or parse errors
  domain,          // an iterate or evaluation left its admissible domain
  numerical,       // non-finite values, singular modes, quadrature failure
  divergence,      // fixed-point iteration failed to contract
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace isochron

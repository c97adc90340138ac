#pragma once

#include <stdexcept>
#include <string>

namespace ivate {

enum class ErrorKind {
  invalid_argument,
  data,
  rank_deficient,
  separation,
  non_convergence,
  singular_jacobian,
  non_finite,
  denominator_floor,
  quadrature,
  excess_failures,
  unsupported,
  io,
  usage,  // malformed configuration or command line
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this exception; the C API maps
// `kind()` onto its status codes.
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

}  // namespace ivate

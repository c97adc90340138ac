#include "ivate/error.hpp"

namespace ivate {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::data: return "data";
    case ErrorKind::rank_deficient: return "rank_deficient";
    case ErrorKind::separation: return "separation";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::singular_jacobian: return "singular_jacobian";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::denominator_floor: return "denominator_floor";
    case ErrorKind::quadrature: return "quadrature";
    case ErrorKind::excess_failures: return "excess_failures";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

}  // namespace ivate

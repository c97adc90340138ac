#include "ivate/solve.hpp"

#include "ivate/error.hpp"

#include <cmath>

namespace ivate {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

Vector EstimatingEquation::residual(const Vector& theta) const {
  const Matrix rows = contributions(theta);
  return rows.colwise().mean().transpose();
}

Matrix finite_difference_jacobian(const EstimatingEquation& eq, const Vector& theta) {
  const Index q = theta.size();
  Matrix jac(q, q);
  Vector probe = theta;
  for (Index j = 0; j < q; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const Vector up = eq.residual(probe);
    probe[j] = theta[j] - h;
    const Vector down = eq.residual(probe);
    probe[j] = theta[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

namespace {

Matrix jacobian_at(const EstimatingEquation& eq, const Vector& theta, const SolveOptions& options) {
  return (options.analytic_jacobian && eq.jacobian) ? eq.jacobian(theta) : finite_difference_jacobian(eq, theta);
}

SolveReport newton(const EstimatingEquation& eq, const Vector& init, const SolveOptions& options) {
  SolveReport report;
  report.solution = init;
  Vector r = eq.residual(init);
  if (!all_finite(r)) fail(ErrorKind::non_finite, "estimating equation is not finite at the initial value");
  report.residual_norm = r.lpNorm<Eigen::Infinity>();

  while (report.residual_norm > options.tolerance) {
    if (report.iterations >= options.max_iterations) {
      fail(ErrorKind::non_convergence, "Newton solver did not converge in " + std::to_string(options.max_iterations) +
                                           " iterations (residual " + std::to_string(report.residual_norm) + ")");
    }
    const Matrix jac = jacobian_at(eq, report.solution, options);
    if (!jac.allFinite()) fail(ErrorKind::non_finite, "Jacobian is not finite");
    Eigen::ColPivHouseholderQR<Matrix> qr(jac);
    qr.setThreshold(1e-12);
    if (qr.rank() < jac.cols()) fail(ErrorKind::singular_jacobian, "singular Jacobian in Newton solver");
    const Vector step = qr.solve(-r);

    const double current = r.norm();
    double scale = 1.0;
    Vector candidate;
    Vector candidate_r;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving) {
      candidate = report.solution + scale * step;
      candidate_r = eq.residual(candidate);
      if (all_finite(candidate_r) && candidate_r.norm() < current) {
        accepted = true;
        break;
      }
      ++report.damping_events;
      scale *= 0.5;
    }
    if (!accepted) {
      if (!all_finite(candidate_r)) fail(ErrorKind::non_finite, "estimating equation became non-finite");
      fail(ErrorKind::non_convergence, "Newton line search failed to reduce the residual");
    }
    report.solution = candidate;
    r = candidate_r;
    report.residual_norm = r.lpNorm<Eigen::Infinity>();
    ++report.iterations;
  }
  report.converged = true;
  return report;
}

}  // namespace

SolveReport minimize_residual(const EstimatingEquation& eq, const Vector& init, const SolveOptions& options) {
  if (init.size() != eq.dimension) fail(ErrorKind::invalid_argument, "initial value has the wrong dimension");
  SolveReport report;
  report.solution = init;
  Vector r = eq.residual(init);
  if (!all_finite(r)) fail(ErrorKind::non_finite, "estimating equation is not finite at the initial value");
  double lambda = 1e-3;
  while (r.lpNorm<Eigen::Infinity>() > options.tolerance && report.iterations < options.lm_max_iterations) {
    const Matrix jac = jacobian_at(eq, report.solution, options);
    if (!jac.allFinite()) break;
    const Matrix normal = jac.transpose() * jac;
    const Vector gradient = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Matrix damped = normal;
      damped.diagonal().array() += lambda * (normal.diagonal().array() + 1e-300);
      const Vector step = damped.ldlt().solve(-gradient);
      const Vector candidate = report.solution + step;
      const Vector candidate_r = eq.residual(candidate);
      if (step.allFinite() && all_finite(candidate_r) && candidate_r.squaredNorm() < r.squaredNorm()) {
        const double relative_gain = (r.squaredNorm() - candidate_r.squaredNorm()) / r.squaredNorm();
        report.solution = candidate;
        r = candidate_r;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = relative_gain > 1e-15;
        break;
      }
      ++report.damping_events;
      lambda *= 4.0;
    }
    ++report.iterations;
    if (!improved) break;
  }
  report.residual_norm = r.lpNorm<Eigen::Infinity>();
  report.converged = report.residual_norm <= options.tolerance;
  report.used_fallback = true;
  return report;
}

SolveReport solve(const EstimatingEquation& eq, const Vector& init, const SolveOptions& options) {
  if (init.size() != eq.dimension) fail(ErrorKind::invalid_argument, "initial value has the wrong dimension");
  try {
    return newton(eq, init, options);
  } catch (const Error& e) {
    const bool stalled = e.kind() == ErrorKind::singular_jacobian || e.kind() == ErrorKind::non_convergence;
    if (!stalled || !options.lm_fallback) throw;
    SolveReport lm = minimize_residual(eq, init, options);
    if (lm.converged || options.accept_minimizer) return lm;
    fail(ErrorKind::non_convergence, std::string("no root found (") + e.what() +
                                         "; Levenberg-Marquardt stalled at residual " +
                                         std::to_string(lm.residual_norm) + ")");
  }
}

}  // namespace ivate

#pragma once

#include "ivate/data.hpp"

#include <functional>

namespace ivate {

// An unbiased estimating equation P_n[psi(O; theta)] = 0. `contributions`
// returns the n x q matrix of per-row psi values; the residual is its column
// mean, which is what the sandwich variance and the bootstrap rely on.
struct EstimatingEquation {
  int dimension = 0;
  std::function<Matrix(const Vector&)> contributions;
  // Optional analytic d residual / d theta (q x q).
  std::function<Matrix(const Vector&)> jacobian;

  Vector residual(const Vector& theta) const;
};

struct SolveOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
  int max_halvings = 30;
  bool analytic_jacobian = false;
  // When Newton stalls, retry with Levenberg-Marquardt from the same start.
  bool lm_fallback = true;
  int lm_max_iterations = 500;
  // With no root in reach, return the residual-norm minimizer with
  // converged == false instead of throwing.
  bool accept_minimizer = false;
};

struct SolveReport {
  Vector solution;
  double residual_norm = 0.0;  // infinity norm
  int iterations = 0;
  bool converged = false;
  int damping_events = 0;
  bool used_fallback = false;
};

// Central differences with step 1e-6 * max(1, |theta_j|).
Matrix finite_difference_jacobian(const EstimatingEquation& eq, const Vector& theta);

// Damped Newton, then (optionally) Levenberg-Marquardt on 0.5 |residual|^2.
// Throws ErrorKind::singular_jacobian, non_convergence or non_finite; a
// returned report has converged == true unless accept_minimizer is set.
SolveReport solve(const EstimatingEquation& eq, const Vector& init, const SolveOptions& options = {});

// Levenberg-Marquardt minimization of 0.5 |residual|^2. Never throws on
// stalling; converged reports whether the tolerance was met.
SolveReport minimize_residual(const EstimatingEquation& eq, const Vector& init, const SolveOptions& options = {});

}  // namespace ivate

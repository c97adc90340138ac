#pragma once

#include "ivate/data.hpp"

namespace ivate::glm {

struct FitResult {
  Vector coefficients;
  bool converged = false;
  int iterations = 0;
  double final_score_norm = 0.0;  // infinity norm of the mean score
};

struct FitOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  double separation_threshold = 30.0;
};

// Bernoulli maximum likelihood with expit link: Newton/IRLS with step halving
// when the log-likelihood decreases. Throws rank_deficient, separation or
// non_convergence.
FitResult fit_logistic(const Matrix& design, const Vector& response, const FitOptions& options = {});

// Gaussian maximum likelihood (least squares) via column-pivoted QR.
FitResult fit_linear(const Matrix& design, const Vector& response);

// Numerical rank with a relative pivot threshold of 1e-12.
Index numerical_rank(const Matrix& design);

}  // namespace ivate::glm

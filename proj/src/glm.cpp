#include "ivate/glm.hpp"

#include "ivate/error.hpp"

#include <cmath>

namespace ivate::glm {

namespace {

constexpr double kPivotThreshold = 1e-12;

void require_full_rank(const Matrix& design) {
  if (design.rows() < design.cols()) {
    fail(ErrorKind::rank_deficient, "design has fewer rows than columns");
  }
  const Index rank = numerical_rank(design);
  if (rank < design.cols()) {
    fail(ErrorKind::rank_deficient, "rank-deficient design (rank " + std::to_string(rank) + " < " +
                                        std::to_string(design.cols()) + ")");
  }
}

double log_likelihood(const Vector& eta, const Vector& y) {
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) computed without overflow
    const double e = eta[i];
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[i] * e - softplus;
  }
  return ll;
}

// Coefficients expressed on the standardized design: slopes scaled by the
// column SD, intercept evaluated at the column means.
double standardized_norm(const Matrix& design, const Vector& beta) {
  const Vector mean = design.colwise().mean();
  double intercept = 0.0;
  double norm = 0.0;
  bool has_constant = false;
  for (Index j = 0; j < design.cols(); ++j) {
    const double sd = std::sqrt((design.col(j).array() - mean[j]).square().mean());
    if (sd == 0.0) {
      has_constant = true;
      intercept += beta[j] * mean[j];
    } else {
      norm = std::max(norm, std::abs(beta[j] * sd));
      intercept += beta[j] * mean[j];
    }
  }
  if (has_constant) norm = std::max(norm, std::abs(intercept));
  return norm;
}

}  // namespace

Index numerical_rank(const Matrix& design) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(kPivotThreshold);
  return qr.rank();
}

FitResult fit_logistic(const Matrix& design, const Vector& response, const FitOptions& options) {
  if (design.rows() != response.size()) fail(ErrorKind::invalid_argument, "design/response length mismatch");
  for (Index i = 0; i < response.size(); ++i) {
    if (response[i] != 0.0 && response[i] != 1.0) fail(ErrorKind::invalid_argument, "logistic response not binary");
  }
  require_full_rank(design);
  const double mean = response.mean();
  if (mean == 0.0 || mean == 1.0) {
    fail(ErrorKind::separation, "perfect separation: response is constant");
  }

  const double n = static_cast<double>(design.rows());
  FitResult fit;
  fit.coefficients = Vector::Zero(design.cols());
  Vector eta = Vector::Zero(design.rows());
  double ll = log_likelihood(eta, response);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Vector prob = eta.unaryExpr([](double e) { return expit(e); });
    const Vector score = design.transpose() * (response - prob) / n;
    fit.final_score_norm = score.lpNorm<Eigen::Infinity>();
    if (fit.final_score_norm <= options.tolerance) {
      fit.converged = true;
      return fit;
    }
    const Vector w = prob.array() * (1.0 - prob.array());
    const Matrix info = design.transpose() * w.asDiagonal() * design / n;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
      fail(ErrorKind::separation, "perfect separation: information matrix degenerate");
    }
    const Vector step = ldlt.solve(score);

    double scale = 1.0;
    Vector candidate;
    Vector candidate_eta;
    double candidate_ll = 0.0;
    for (int halving = 0; halving <= 30; ++halving) {
      candidate = fit.coefficients + scale * step;
      candidate_eta = design * candidate;
      candidate_ll = log_likelihood(candidate_eta, response);
      if (candidate_ll >= ll - 1e-12 * std::abs(ll)) break;
      scale *= 0.5;
    }
    fit.coefficients = candidate;
    eta = candidate_eta;
    ll = candidate_ll;
    fit.iterations = iter;

    if (standardized_norm(design, fit.coefficients) > options.separation_threshold) {
      fail(ErrorKind::separation, "perfect separation: coefficients diverging");
    }
  }
  const Vector prob = eta.unaryExpr([](double e) { return expit(e); });
  fit.final_score_norm = (design.transpose() * (response - prob) / n).lpNorm<Eigen::Infinity>();
  if (fit.final_score_norm <= options.tolerance) {
    fit.converged = true;
    return fit;
  }
  fail(ErrorKind::non_convergence, "logistic regression did not converge in " +
                                       std::to_string(options.max_iterations) + " iterations");
}

FitResult fit_linear(const Matrix& design, const Vector& response) {
  if (design.rows() != response.size()) fail(ErrorKind::invalid_argument, "design/response length mismatch");
  require_full_rank(design);
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(kPivotThreshold);
  FitResult fit;
  fit.coefficients = qr.solve(response);
  const Vector residual = response - design * fit.coefficients;
  fit.final_score_norm =
      (design.transpose() * residual).lpNorm<Eigen::Infinity>() / static_cast<double>(design.rows());
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

}  // namespace ivate::glm

#include "ivate/equations.hpp"

#include "ivate/error.hpp"

#include <cmath>
#include <memory>

namespace ivate {

namespace {

// Rows of the form phi_i (a_i - b_i g(x_i' theta)). Every equation in this
// file has this shape, which also gives the analytic Jacobian
// -P_n[phi_i b_i g'(eta_i) x_i'].
struct LinkedEquation {
  Matrix phi;
  Matrix x;
  Vector a;
  Vector b;
  Link link = Link::identity;
};

EstimatingEquation to_equation(LinkedEquation eq) {
  auto shared = std::make_shared<const LinkedEquation>(std::move(eq));
  EstimatingEquation out;
  out.dimension = static_cast<int>(shared->x.cols());
  out.contributions = [shared](const Vector& theta) {
    const Vector eta = shared->x * theta;
    const Vector g = eta.unaryExpr([&](double e) { return apply_link(shared->link, e); });
    const Vector scalar = shared->a.array() - shared->b.array() * g.array();
    return Matrix(shared->phi.array().colwise() * scalar.array());
  };
  out.jacobian = [shared](const Vector& theta) {
    const Vector eta = shared->x * theta;
    const Vector w = shared->b.array() * eta.unaryExpr([&](double e) { return link_derivative(shared->link, e); }).array();
    return Matrix(-(shared->phi.transpose() * w.asDiagonal() * shared->x) / static_cast<double>(shared->x.rows()));
  };
  return out;
}

Matrix model_design(const ObservationTable& table, const NuisanceModel& model) {
  return design(table, model.columns);
}

void require_identified(const EstimatingEquation& eq, const Vector& at, const char* what, const char* hint) {
  const Matrix jac = finite_difference_jacobian(eq, at);
  Eigen::ColPivHouseholderQR<Matrix> qr(jac);
  qr.setThreshold(1e-12);
  if (jac.isZero(0.0) || qr.rank() < jac.cols()) {
    fail(ErrorKind::singular_jacobian, std::string("singular Jacobian: ") + what + " is not identified; " + hint);
  }
}

void note_minimizer(EquationFit& fit, const char* what) {
  if (fit.report.converged) return;
  fit.notes.push_back(std::string("no finite root for ") + what + "; kept the residual-norm minimizer (residual " +
                      std::to_string(fit.report.residual_norm) + ")");
}

EquationFit run(const EstimatingEquation& eq, const SolveOptions& options, const Vector* init, const char* what) {
  const Vector start = init ? *init : Vector::Zero(eq.dimension);
  EquationFit fit;
  fit.report = solve(eq, start, options);
  fit.coefficients = fit.report.solution;
  note_minimizer(fit, what);
  return fit;
}

// Identification is checked where the solve starts and again at the root, so
// a degenerate design is reported as such rather than as a missing root.
EquationFit run_identified(const EstimatingEquation& eq, const SolveOptions& options, const Vector* init,
                           const char* what, const char* hint) {
  const Vector start = init ? *init : Vector::Zero(eq.dimension);
  require_identified(eq, start, what, hint);
  EquationFit fit = run(eq, options, &start, what);
  if (fit.report.converged) require_identified(eq, fit.coefficients, what, hint);
  return fit;
}

}  // namespace

Vector propensity(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& iota) {
  Vector mu_d = fitted(table, spec.mu_d, iota);
  for (Index i = 0; i < mu_d.size(); ++i) {
    if (!(mu_d[i] > kPropensityFloor && mu_d[i] < 1.0 - kPropensityFloor)) {
      fail(ErrorKind::denominator_floor, "propensity floor violated: mu^D = " + std::to_string(mu_d[i]) +
                                             " at row " + std::to_string(i));
    }
  }
  return mu_d;
}

Vector covariance_denominator(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& beta,
                              const Vector& iota) {
  const Vector mu_d = propensity(table, spec, iota);
  const Vector delta_z = fitted(table, spec.delta_z, beta);
  Vector den = delta_z.array() * mu_d.array() * (1.0 - mu_d.array());
  for (Index i = 0; i < den.size(); ++i) {
    if (!(std::abs(den[i]) >= kDenominatorFloor)) {
      fail(ErrorKind::denominator_floor, "denominator floor violated: delta^Z mu^D (1 - mu^D) = " +
                                             std::to_string(den[i]) + " at row " + std::to_string(i));
    }
  }
  return den;
}

EstimatingEquation beta_ipw_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& iota) {
  const Vector mu_d = propensity(table, spec, iota);
  const Vector& d = table.d();
  const Vector& z = table.z();
  LinkedEquation eq;
  eq.x = model_design(table, spec.delta_z);
  eq.phi = eq.x;
  eq.a = (d.array() * z.array() / mu_d.array() - (1.0 - d.array()) * z.array() / (1.0 - mu_d.array())).matrix();
  eq.b = Vector::Ones(table.n());
  eq.link = spec.delta_z.link;
  return to_equation(std::move(eq));
}

EstimatingEquation alpha_dr_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& zeta, const Vector& iota, const Vector& theta,
                                     const Vector& beta, Phi2Mode mode) {
  const Vector mu_d = propensity(table, spec, iota);
  const Vector mu_z = fitted(table, spec.mu_z, zeta);
  const Vector mu_y = fitted(table, spec.mu_y, theta);
  const Vector centered_z = table.z() - mu_z;
  LinkedEquation eq;
  eq.x = model_design(table, spec.delta);
  eq.phi = eq.x;
  if (mode == Phi2Mode::bounded) {
    const Vector den = covariance_denominator(table, spec, beta, iota);
    eq.phi.col(0) = den.cwiseInverse();
  }
  eq.a = centered_z.array() * (table.y() - mu_y).array();
  eq.b = centered_z.array() * (table.d() - mu_d).array();
  eq.link = spec.delta.link;
  return to_equation(std::move(eq));
}

EstimatingEquation alpha_1_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                    const Vector& theta, const Vector& iota) {
  const Vector mu_d = propensity(table, spec, iota);
  const Vector mu_y = fitted(table, spec.mu_y, theta);
  LinkedEquation eq;
  eq.x = model_design(table, spec.delta);
  eq.phi = eq.x;
  eq.a = table.z().array() * (table.y() - mu_y).array();
  eq.b = table.z().array() * (table.d() - mu_d).array();
  eq.link = spec.delta.link;
  return to_equation(std::move(eq));
}

EstimatingEquation alpha_2b_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& zeta, const Vector& iota, const Vector& beta) {
  const Vector den = covariance_denominator(table, spec, beta, iota);
  const Vector mu_z = fitted(table, spec.mu_z, zeta);
  LinkedEquation eq;
  eq.x = model_design(table, spec.delta);
  eq.phi = eq.x;
  eq.a = (table.z() - mu_z).array() * table.y().array() / den.array();
  eq.b = Vector::Ones(table.n());
  eq.link = spec.delta.link;
  return to_equation(std::move(eq));
}

EstimatingEquation alpha_3_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                    const Vector& zeta) {
  const Vector mu_z = fitted(table, spec.mu_z, zeta);
  const Vector centered_z = table.z() - mu_z;
  LinkedEquation eq;
  eq.x = model_design(table, spec.delta);
  eq.phi = eq.x;
  eq.a = centered_z.array() * table.y().array();
  eq.b = centered_z.array() * table.d().array();
  eq.link = spec.delta.link;
  return to_equation(std::move(eq));
}

EquationFit estimate_beta_ipw(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& iota,
                              const SolveOptions& options, const Vector* init) {
  const auto eq = beta_ipw_equation(table, spec, iota);
  EquationFit fit = run_identified(eq, options, init, "beta", "check the delta_z design");
  const double treated = table.d().sum();
  if (treated == 0.0 || treated == static_cast<double>(table.n())) {
    fit.notes.emplace_back("treatment is constant; IV relevance is unverifiable");
  }
  return fit;
}

EquationFit estimate_alpha_dr(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                              const Vector& iota, const Vector& theta, const Vector& beta, Phi2Mode mode,
                              const SolveOptions& options, const Vector* init) {
  const auto eq = alpha_dr_equation(table, spec, zeta, iota, theta, beta, mode);
  EquationFit fit = run(eq, options, init, "alpha_dr");
  if (fit.report.iterations == 0) fit.notes.emplace_back("residual vanished at the initial value");
  return fit;
}

EquationFit estimate_alpha_1(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& theta,
                             const Vector& iota, const SolveOptions& options, const Vector* init) {
  const auto eq = alpha_1_equation(table, spec, theta, iota);
  EquationFit fit = run_identified(eq, options, init, "alpha_1",
                                   "the residual does not depend on alpha (is the instrument identically zero?)");
  return fit;
}

EquationFit estimate_alpha_2b(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                              const Vector& iota, const Vector& beta, const SolveOptions& options,
                              const Vector* init) {
  const auto eq = alpha_2b_equation(table, spec, zeta, iota, beta);
  EquationFit fit = run_identified(eq, options, init, "alpha_2", "check the delta design");
  return fit;
}

EquationFit estimate_alpha_3(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                             const SolveOptions& options, const Vector* init) {
  const auto eq = alpha_3_equation(table, spec, zeta);
  EquationFit fit = run_identified(eq, options, init, "alpha_3",
                                   "the residual does not depend on alpha (is the treatment identically zero?)");
  return fit;
}

EstimatingEquation score_equation(const ObservationTable& table, const NuisanceModel& model, const Vector& response) {
  if (model.link == Link::tanh) fail(ErrorKind::invalid_argument, "score_equation needs an identity or expit link");
  LinkedEquation eq;
  eq.x = design(table, model.columns);
  eq.phi = eq.x;
  eq.a = response;
  eq.b = Vector::Ones(table.n());
  eq.link = model.link;
  return to_equation(std::move(eq));
}

}  // namespace ivate

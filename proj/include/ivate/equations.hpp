#pragma once

#include "ivate/data.hpp"
#include "ivate/solve.hpp"

#include <string>
#include <vector>

namespace ivate {

// Positivity floors. Violations are errors, never truncated.
inline constexpr double kPropensityFloor = 1e-10;
inline constexpr double kDenominatorFloor = 1e-10;

enum class Phi2Mode { plain, bounded };

struct EquationFit {
  Vector coefficients;
  SolveReport report;
  std::vector<std::string> notes;
};

// Fitted mu^D with the propensity floor enforced.
Vector propensity(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& iota);

// delta^Z(X; beta) mu^D(X; iota) (1 - mu^D(X; iota)), floored in absolute value.
Vector covariance_denominator(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& beta,
                              const Vector& iota);

// P_n[phi1 (DZ/mu^D - (1-D)Z/(1-mu^D) - delta^Z(X; beta))] = 0
EstimatingEquation beta_ipw_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& iota);

// P_n[phi2 (Z - mu^Z){Y - mu^Y - delta(X; alpha)(D - mu^D)}] = 0; in bounded
// mode the first component of phi2 is 1 / {delta^Z mu^D (1 - mu^D)}.
EstimatingEquation alpha_dr_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& zeta, const Vector& iota, const Vector& theta,
                                     const Vector& beta, Phi2Mode mode);

// P_n[phi Z {Y - mu^Y - delta(X; alpha1)(D - mu^D)}] = 0
EstimatingEquation alpha_1_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                    const Vector& theta, const Vector& iota);

// P_n[phi {(Z - mu^Z) Y / (delta^Z mu^D (1 - mu^D)) - delta(X; alpha2)}] = 0
EstimatingEquation alpha_2b_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                     const Vector& zeta, const Vector& iota, const Vector& beta);

// g-estimation: P_n[phi (Z - mu^Z){Y - delta(X; alpha3) D}] = 0
EstimatingEquation alpha_3_equation(const ObservationTable& table, const WorkingModelSpec& spec,
                                    const Vector& zeta);

// Solvers for the equations above, zero-initialized unless `init` is given.
EquationFit estimate_beta_ipw(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& iota,
                              const SolveOptions& options = {}, const Vector* init = nullptr);
EquationFit estimate_alpha_dr(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                              const Vector& iota, const Vector& theta, const Vector& beta, Phi2Mode mode,
                              const SolveOptions& options = {}, const Vector* init = nullptr);
EquationFit estimate_alpha_1(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& theta,
                             const Vector& iota, const SolveOptions& options = {}, const Vector* init = nullptr);
EquationFit estimate_alpha_2b(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                              const Vector& iota, const Vector& beta, const SolveOptions& options = {},
                              const Vector* init = nullptr);
EquationFit estimate_alpha_3(const ObservationTable& table, const WorkingModelSpec& spec, const Vector& zeta,
                             const SolveOptions& options = {}, const Vector* init = nullptr);

// Maximum-likelihood score rows x_i (r_i - link(x_i' c)) for a canonical-link
// nuisance regression (identity or expit); used when stacking equations.
EstimatingEquation score_equation(const ObservationTable& table, const NuisanceModel& model, const Vector& response);

}  // namespace ivate

#pragma once

#include "ivate/data.hpp"
#include "ivate/equations.hpp"
#include "ivate/glm.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ivate {

enum class EstimatorId { delta1, delta2, delta_b2, delta3, delta_tr, delta_b_tr, crude_rd, tsls };

const char* to_string(EstimatorId id);
EstimatorId parse_estimator(std::string_view name);
bool is_bounded(EstimatorId id);

struct NuisanceEstimates {
  WorkingModelSpec spec;
  Phi2Mode phi2_mode = Phi2Mode::plain;
  Vector alpha;  // alpha_dr
  Vector beta;   // beta_ipw
  Vector zeta;
  Vector iota;
  Vector theta;
  glm::FitResult zeta_fit;
  glm::FitResult iota_fit;
  glm::FitResult theta_fit;
  SolveReport beta_report;
  SolveReport alpha_report;
  SolveOptions solve_options;
  std::vector<std::string> notes;
};

struct EstimateResult {
  EstimatorId estimator = EstimatorId::delta_b_tr;
  double point = 0.0;
  std::optional<double> se;
  std::optional<std::pair<double, double>> ci;
  Index n = 0;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> notes;
};

// zeta, iota, theta by maximum likelihood; beta by IPW; alpha_dr with the
// requested phi2 (left empty when no mode is given). Rejects categorical
// instruments with more than two levels.
NuisanceEstimates fit_nuisances(const ObservationTable& table, const WorkingModelSpec& spec,
                                std::optional<Phi2Mode> mode, const SolveOptions& options = {});
// Solves for alpha_dr on top of already fitted zeta, iota, theta, beta.
void fit_alpha_dr(const ObservationTable& table, NuisanceEstimates& nuisances, Phi2Mode mode);

// E_i = y_i - mu^Y(x_i) - delta(x_i; alpha)(d_i - mu^D(x_i)).
Vector residual_e(const ObservationTable& table, const NuisanceEstimates& nuisances);

// P_n[(Z - mu^Z) E / {delta^Z mu^D (1 - mu^D)} + delta(X; alpha)]
EstimateResult delta_tr(const ObservationTable& table, const NuisanceEstimates& nuisances);
// P_n[delta(X; alpha_dr)] with alpha_dr fit under bounded phi2.
EstimateResult delta_b_tr(const ObservationTable& table, const NuisanceEstimates& nuisances);
EstimateResult delta_1(const ObservationTable& table, const NuisanceEstimates& nuisances);
EstimateResult delta_2(const ObservationTable& table, const NuisanceEstimates& nuisances);
EstimateResult delta_b2(const ObservationTable& table, const NuisanceEstimates& nuisances);
EstimateResult delta_3(const ObservationTable& table, const NuisanceEstimates& nuisances);

// mean(Y | D = 1) - mean(Y | D = 0)
EstimateResult crude_rd(const ObservationTable& table);
// Two-stage least squares with Z as the single instrument and the given
// x columns as exogenous covariates; returns the coefficient on D-hat.
EstimateResult tsls(const ObservationTable& table, std::span<const int> covariate_columns);

// Everything needed to run an estimator end to end on a table.
struct PipelineSpec {
  WorkingModelSpec models;
  std::vector<int> tsls_columns;
  SolveOptions solve_options;
};

PipelineSpec default_pipeline(const ObservationTable& table);

// Fits the nuisances each estimator needs (plain and/or bounded phi2) once and
// evaluates every requested estimator.
std::vector<EstimateResult> estimate_all(const ObservationTable& table, const PipelineSpec& pipeline,
                                         std::span<const EstimatorId> ids);
EstimateResult estimate(const ObservationTable& table, const PipelineSpec& pipeline, EstimatorId id);

// Sandwich SE from the stacked estimating equations
// (zeta, iota, theta, beta, alpha, Delta) with a finite-difference bread.
double sandwich_se(const ObservationTable& table, const PipelineSpec& pipeline, EstimatorId id);

// ---------------------------------------------------------------------------
// Nonparametric bootstrap

enum class CiMethod { percentile, normal };

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double level = 0.95;
  CiMethod method = CiMethod::percentile;
  double max_failure_fraction = 0.05;
};

struct BootstrapSummary {
  double se = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
  int used = 0;
  int failed = 0;
};

// Type-7 (linear interpolation) empirical quantile.
double empirical_quantile(std::vector<double> values, double prob);

// Resample b draws rows from Philox stream (seed, b). Failing resamples are
// dropped and counted; more than max_failure_fraction failing is an error.
using TableEstimator = std::function<double(const ObservationTable&)>;
BootstrapSummary bootstrap(const TableEstimator& estimator, const ObservationTable& table,
                           const BootstrapOptions& options);

// One set of resamples shared by all requested estimators; each resample
// refits the whole pipeline.
std::vector<BootstrapSummary> bootstrap(std::span<const EstimatorId> ids, const ObservationTable& table,
                                        const PipelineSpec& pipeline, const BootstrapOptions& options);

}  // namespace ivate

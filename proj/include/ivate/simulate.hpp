#pragma once

#include "ivate/data.hpp"
#include "ivate/estimators.hpp"
#include "ivate/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivate::sim {

enum class Setting { continuous, binary, dichotomized };  // I, II, III

const char* to_string(Setting s);
Setting parse_setting(std::string_view name);  // "I", "II", "III"

struct DgpParams {
  Vector alpha, beta, zeta, iota, theta;
  double sigma = 1.0;
  double nu = 0.8;
  double kappa = 0.1;

  static DgpParams setting1();
  static DgpParams setting2();
  static DgpParams for_setting(Setting s);
  void validate() const;
};

// log(sin(nu pi u) / sin(nu pi (1 - u))); the caller applies the 1/nu scale.
double bridge_noise(double nu, double u);

struct GeneratedData {
  ObservationTable table;
  Vector u;  // latent confounder, filled when requested
  Vector s;  // latent mixture label (Setting I only), filled when requested
  Index clamped = 0;
};

// Rows are drawn sequentially from `rng`. With more than 1% of outcome
// probabilities clamped into [0, 1] the parameters are rejected.
GeneratedData gen_setting1(const DgpParams& params, Index n, Philox& rng, bool keep_latent = false);
GeneratedData gen_setting2(const DgpParams& params, Index n, Philox& rng, bool keep_latent = false);

struct MonteCarloValue {
  double value = 0.0;
  double mcse = 0.0;
};

// Mean of tanh(alpha'X) over M covariate draws from Philox(seed, kTruthStream).
inline constexpr std::uint64_t kTruthStream = 0xfffffffffffffffeULL;
MonteCarloValue true_ate(const DgpParams& params, Index draws, std::uint64_t seed);

struct SimulationConfig {
  Setting setting = Setting::continuous;
  std::vector<Scenario> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
  std::vector<EstimatorId> estimators{EstimatorId::delta1, EstimatorId::delta_b2, EstimatorId::delta3,
                                      EstimatorId::delta_b_tr};
  Index n = 1000;
  int reps = 2000;
  std::uint64_t seed = 1;
  std::optional<double> quantile;  // required for the dichotomized setting
  unsigned threads = 0;
  std::optional<DgpParams> params;  // defaults per setting
  Index truth_draws = 10'000'000;
  double max_failure_fraction = 0.01;
  // Keep the residual-norm minimizer when an equation has no finite root
  // (tanh saturation) instead of counting the replicate as failed.
  bool accept_minimizer = true;
};

struct CellSummary {
  EstimatorId estimator = EstimatorId::delta_b_tr;
  Scenario scenario = Scenario::all_correct;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;    // sample SD over replicates
  double mcse = 0.0;  // sd / sqrt(used)
  double rmse = 0.0;  // sqrt(bias^2 + sd^2)
  int used = 0;
  int failed = 0;
  int no_root = 0;  // used replicates whose equations had no finite root
};

struct ReplicateEstimate {
  int replicate = 0;
  EstimatorId estimator = EstimatorId::delta_b_tr;
  Scenario scenario = Scenario::all_correct;
  double estimate = 0.0;
};

struct SimulationDiagnostics {
  long bounded_violations = 0;     // bounded estimates outside [-1, 1]
  double max_tr_gap = 0.0;         // max |delta_tr - delta_b_tr| at converged bounded nuisances
  long clamped_rows = 0;
  long total_rows = 0;
  std::vector<std::string> failure_samples;  // first few failure messages
};

struct SimulationReport {
  SimulationConfig config;
  MonteCarloValue truth;
  std::vector<CellSummary> cells;  // scenario-major, estimator order as configured
  std::vector<ReplicateEstimate> estimates;
  SimulationDiagnostics diagnostics;

  const CellSummary& cell(EstimatorId estimator, Scenario scenario) const;
};

SimulationReport run_scenarios(const SimulationConfig& config);

}  // namespace ivate::sim

#pragma once

// Run configurations, end-to-end runners and their serialized outputs. The C
// API and the command-line tool are thin layers over this header.

#include "ivate/estimators.hpp"
#include "ivate/riesz.hpp"
#include "ivate/simulate.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivate::app {

inline constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a64(std::string_view bytes);

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

// Shortest round-trip decimal; "NA" for NaN.
std::string format_number(double value);

// ---------------------------------------------------------------------------
// fit

struct ModelOverride {
  std::optional<Link> link;
  std::optional<std::vector<int>> columns;  // design columns, 0 = intercept
};

struct FitConfig {
  std::string input;
  InstrumentKind instrument = InstrumentKind::continuous();
  std::array<ModelOverride, 5> models{};  // indexed by Nuisance
  std::optional<std::vector<int>> tsls_columns;
  std::vector<EstimatorId> estimators{EstimatorId::delta_b_tr};
  int bootstrap = 1000;  // 0 disables the bootstrap
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double ci_level = 0.95;
  CiMethod ci_method = CiMethod::percentile;
  bool sandwich = false;
  bool accept_nonroot = false;
  std::string out = ".";
};

// Unknown keys, bad types and unknown names throw ErrorKind::usage.
FitConfig parse_fit_config(const nlohmann::json& j);
// Canonical form hashed into the provenance header (threads and out omitted).
nlohmann::json canonical(const FitConfig& config);

PipelineSpec build_pipeline(const FitConfig& config, const ObservationTable& table);

struct FitOutput {
  Provenance provenance;
  std::vector<EstimateResult> results;
  std::vector<std::optional<BootstrapSummary>> bootstrap;
  std::vector<std::optional<double>> sandwich_se;
  int replicates = 0;
  std::uint64_t seed = 0;
};

FitOutput run_fit(const FitConfig& config, const ObservationTable& table);
FitOutput run_fit(const FitConfig& config);  // reads config.input

nlohmann::json to_json(const FitOutput& output);
std::string fit_json(const FitOutput& output);
std::string fit_csv(const FitOutput& output);

// ---------------------------------------------------------------------------
// simulate

struct SimulateConfig {
  sim::SimulationConfig base;
  std::vector<double> quantiles;  // Setting III; one report per quantile
  std::string out = ".";
};

SimulateConfig parse_simulate_config(const nlohmann::json& j);
nlohmann::json canonical(const SimulateConfig& config);

struct SimulateOutput {
  Provenance provenance;
  std::vector<sim::SimulationReport> reports;  // one, or one per quantile
};

SimulateOutput run_simulate(const SimulateConfig& config);

std::string simulation_table_csv(const SimulateOutput& output);
std::string simulation_long_csv(const SimulateOutput& output);
std::string simulation_json(const SimulateOutput& output);

// ---------------------------------------------------------------------------
// riesz-check

struct RieszConfig {
  std::string law = "all";  // all, gaussian, uniform, categorical
  std::vector<std::string> cases;  // empty: every case of the law
  double tolerance = 1e-5;
};

RieszConfig parse_riesz_config(const nlohmann::json& j);
std::vector<std::string> selected_cases(const RieszConfig& config);

struct RieszOutput {
  std::vector<riesz::CheckResult> checks;
  double tolerance = 0.0;
  bool all_pass = false;
};

RieszOutput run_riesz_check(const RieszConfig& config);
std::string riesz_json(const RieszOutput& output);

// {"error": {"kind": ..., "message": ...}}
std::string error_json(const std::string& kind, const std::string& message);

}  // namespace ivate::app

// Command-line front end. Talks to the library only through the C API.

#include "ivate/ivate.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

struct UsageError {
  std::string message;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON configuration file");
  cmd->add_option("--seed", f.seed, "RNG seed (overrides the config)");
  cmd->add_option("--threads", f.threads, "worker threads, 0 = all cores (results do not depend on it)");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
}

json load_config(const CommonFlags& f) {
  if (f.config_path.empty()) return json::object();
  std::ifstream in(f.config_path);
  if (!in) throw UsageError{"cannot read config file " + f.config_path};
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw UsageError{"config file must hold a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError{"config file is not valid JSON: " + std::string(e.what())};
  }
}

// Flags override individual config keys.
void apply_common(json& j, const CommonFlags& f, bool has_seed_threads) {
  if (has_seed_threads) {
    if (f.seed) j["seed"] = *f.seed;
    if (f.threads) j["threads"] = *f.threads;
  }
  if (f.out) j["out"] = *f.out;
}

std::string out_dir(json& j) {
  std::string dir = ".";
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw UsageError{"key 'out' must be a string"};
    dir = j["out"].get<std::string>();
  }
  return dir;
}

int report_failure(ivate_status status) {
  std::cerr << ivate_last_error_json();
  return status == IVATE_ERR_USAGE ? kUsage : kFailure;
}

int io_failure(const std::string& message) {
  const json record = {{"error", {{"kind", "io"}, {"message", message}}}};
  std::cerr << record.dump() << "\n";
  return kFailure;
}

bool write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  return static_cast<bool>(f);
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  ivate_string_free(s);
  return out;
}

bool prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  return !ec && std::filesystem::is_directory(dir);
}

// ---------------------------------------------------------------------------

struct FitFlags {
  std::optional<std::string> input, instrument;
  std::vector<std::string> estimators;
  std::optional<int> bootstrap;
};

int cmd_fit(const CommonFlags& common, const FitFlags& flags) {
  json j = load_config(common);
  apply_common(j, common, true);
  if (flags.input) j["input"] = *flags.input;
  if (flags.instrument) j["instrument"] = *flags.instrument;
  if (!flags.estimators.empty()) j["estimators"] = flags.estimators;
  if (flags.bootstrap) j["bootstrap"] = *flags.bootstrap;
  const std::string dir = out_dir(j);

  ivate_fit_result* result = nullptr;
  if (ivate_status s = ivate_fit_config(j.dump().c_str(), &result); s != IVATE_OK) return report_failure(s);
  char* json_text = nullptr;
  char* csv_text = nullptr;
  ivate_status s = ivate_fit_json(result, &json_text);
  if (s == IVATE_OK) s = ivate_fit_csv(result, &csv_text);
  ivate_fit_free(result);
  if (s != IVATE_OK) return report_failure(s);
  const std::string body_json = take(json_text), body_csv = take(csv_text);

  if (!prepare_dir(dir)) return io_failure("cannot create output directory " + dir);
  const auto base = std::filesystem::path(dir);
  if (!write_file(base / "fit_results.json", body_json) || !write_file(base / "fit_results.csv", body_csv)) {
    return io_failure("cannot write results in " + dir);
  }
  std::cout << body_csv;
  return kOk;
}

struct SimFlags {
  std::optional<std::string> setting;
  std::vector<std::string> scenarios, estimators;
  std::optional<long> n;
  std::optional<int> reps;
  std::vector<double> quantiles;
};

int cmd_simulate(const CommonFlags& common, const SimFlags& flags) {
  json j = load_config(common);
  apply_common(j, common, true);
  if (flags.setting) j["setting"] = *flags.setting;
  if (!flags.scenarios.empty()) j["scenarios"] = flags.scenarios;
  if (!flags.estimators.empty()) j["estimators"] = flags.estimators;
  if (flags.n) j["n"] = *flags.n;
  if (flags.reps) j["reps"] = *flags.reps;
  if (!flags.quantiles.empty()) j["quantile"] = flags.quantiles;
  const std::string dir = out_dir(j);

  ivate_sim_result* result = nullptr;
  if (ivate_status s = ivate_simulate(j.dump().c_str(), &result); s != IVATE_OK) return report_failure(s);
  char *table = nullptr, *long_form = nullptr, *doc = nullptr;
  ivate_status s = ivate_sim_table_csv(result, &table);
  if (s == IVATE_OK) s = ivate_sim_long_csv(result, &long_form);
  if (s == IVATE_OK) s = ivate_sim_json(result, &doc);
  ivate_sim_free(result);
  const std::string t = take(table), l = take(long_form), d = take(doc);
  if (s != IVATE_OK) return report_failure(s);

  if (!prepare_dir(dir)) return io_failure("cannot create output directory " + dir);
  const auto base = std::filesystem::path(dir);
  if (!write_file(base / "simulation_table.csv", t) || !write_file(base / "simulation_long.csv", l) ||
      !write_file(base / "simulation.json", d)) {
    return io_failure("cannot write results in " + dir);
  }
  std::cout << t;
  return kOk;
}

struct RieszFlags {
  std::optional<std::string> law;
  std::vector<std::string> cases;
  std::optional<double> tolerance;
};

int cmd_riesz(const CommonFlags& common, const RieszFlags& flags) {
  json j = load_config(common);
  if (flags.law) j["law"] = *flags.law;
  if (!flags.cases.empty()) j["cases"] = flags.cases;
  if (flags.tolerance) j["tolerance"] = *flags.tolerance;
  std::optional<std::string> dir = common.out;
  if (j.contains("out")) {
    if (!dir && j["out"].is_string()) dir = j["out"].get<std::string>();
    j.erase("out");
  }

  ivate_riesz_result* result = nullptr;
  if (ivate_status s = ivate_riesz_check(j.dump().c_str(), &result); s != IVATE_OK) return report_failure(s);
  char* doc = nullptr;
  const ivate_status s = ivate_riesz_json(result, &doc);
  const bool pass = ivate_riesz_all_pass(result) != 0;
  ivate_riesz_free(result);
  if (s != IVATE_OK) return report_failure(s);
  const std::string text = take(doc);

  const json parsed = json::parse(text);
  for (const auto& c : parsed["checks"]) {
    char line[256];
    std::snprintf(line, sizeof line, "%-26s %-4s residual %.3e\n", c["id"].get<std::string>().c_str(),
                  c["pass"].get<bool>() ? "ok" : "FAIL", c["residual"].get<double>());
    std::cout << line;
  }
  if (dir) {
    if (!prepare_dir(*dir)) return io_failure("cannot create output directory " + *dir);
    if (!write_file(std::filesystem::path(*dir) / "riesz_check.json", text)) {
      return io_failure("cannot write results in " + *dir);
    }
  }
  if (!pass) {
    std::vector<std::string> failing;
    for (const auto& c : parsed["checks"]) {
      if (!c["pass"].get<bool>()) failing.push_back(c["id"].get<std::string>());
    }
    const json record = {{"error", {{"kind", "check_failed"}, {"failing_cases", failing}}}};
    std::cerr << record.dump() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average treatment effect estimation with continuous, binary or dichotomized instruments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ivate_version()));

  CommonFlags fit_common, sim_common, riesz_common;
  FitFlags fit_flags;
  SimFlags sim_flags;
  RieszFlags riesz_flags;

  auto* fit = app.add_subcommand("fit", "estimate the ATE from a CSV file");
  add_common(fit, fit_common);
  fit->add_option("--input", fit_flags.input, "CSV with columns y, d, z, x1..xp");
  fit->add_option("--instrument", fit_flags.instrument, "continuous, binary or categorical:K");
  fit->add_option("--estimators", fit_flags.estimators, "estimator ids")->delimiter(',');
  fit->add_option("--bootstrap", fit_flags.bootstrap, "bootstrap resamples (0 disables)");

  auto* simulate = app.add_subcommand("simulate", "run the simulation study");
  add_common(simulate, sim_common);
  simulate->add_option("--setting", sim_flags.setting, "I, II or III");
  simulate->add_option("--scenarios", sim_flags.scenarios, "scenario names")->delimiter(',');
  simulate->add_option("--estimators", sim_flags.estimators, "estimator ids")->delimiter(',');
  simulate->add_option("--n", sim_flags.n, "sample size per replicate");
  simulate->add_option("--reps", sim_flags.reps, "number of replicates");
  simulate->add_option("--quantile", sim_flags.quantiles, "dichotomization quantiles (setting III)")->delimiter(',');

  auto* riesz = app.add_subcommand("riesz-check", "run the Riesz representer self-checks");
  add_common(riesz, riesz_common);
  riesz->add_option("--law", riesz_flags.law, "all, gaussian, uniform or categorical");
  riesz->add_option("--case", riesz_flags.cases, "case ids")->delimiter(',');
  riesz->add_option("--tolerance", riesz_flags.tolerance, "maximum residual");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_common, fit_flags);
    if (simulate->parsed()) return cmd_simulate(sim_common, sim_flags);
    return cmd_riesz(riesz_common, riesz_flags);
  } catch (const UsageError& e) {
    const json record = {{"error", {{"kind", "usage"}, {"message", e.message}}}};
    std::cerr << record.dump() << "\n";
    return kUsage;
  }
}

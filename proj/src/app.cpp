#include "ivate/app.hpp"

#include "ivate/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <initializer_list>
#include <sstream>

namespace ivate::app {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void usage(const std::string& message) { fail(ErrorKind::usage, message); }

std::string hex(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

std::string provenance_line(const Provenance& p) {
  return "# ivate " + std::string(kVersion) + " config_hash=" + hex(p.config_hash) + " seed=" +
         std::to_string(p.seed) + "\n";
}

json provenance_json(const Provenance& p) {
  return {{"version", kVersion}, {"config_hash", hex(p.config_hash)}, {"seed", p.seed}};
}

Provenance provenance_of(const json& canonical_config, std::uint64_t seed) {
  return {fnv1a64(canonical_config.dump()), seed};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) usage(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) usage("unknown key '" + key + "' in " + where);
  }
}

template <class F>
auto typed(const json& j, const char* key, const char* what, F&& get) {
  try {
    return get(j.at(key));
  } catch (const json::exception&) {
    usage(std::string("key '") + key + "' must be " + what);
  }
}

std::string get_string(const json& j, const char* key) {
  return typed(j, key, "a string", [](const json& v) { return v.get<std::string>(); });
}
double get_double(const json& j, const char* key) {
  return typed(j, key, "a number", [](const json& v) {
    if (!v.is_number()) throw json::type_error::create(302, "number", nullptr);
    return v.get<double>();
  });
}
std::uint64_t get_u64(const json& j, const char* key) {
  return typed(j, key, "a non-negative integer", [](const json& v) {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw json::type_error::create(302, "unsigned", nullptr);
    }
    return v.get<std::uint64_t>();
  });
}
int get_int(const json& j, const char* key) {
  const auto v = get_u64(j, key);
  if (v > 2'000'000'000ULL) usage(std::string("key '") + key + "' is too large");
  return static_cast<int>(v);
}
bool get_bool(const json& j, const char* key) {
  return typed(j, key, "a boolean", [](const json& v) {
    if (!v.is_boolean()) throw json::type_error::create(302, "boolean", nullptr);
    return v.get<bool>();
  });
}
std::vector<std::string> get_strings(const json& j, const char* key) {
  return typed(j, key, "an array of strings", [](const json& v) { return v.get<std::vector<std::string>>(); });
}

template <class T, class Parse>
T parse_name(const std::string& name, Parse&& parse) {
  try {
    return parse(name);
  } catch (const Error& e) {
    usage(e.what());
  }
}

std::vector<EstimatorId> parse_estimators(const json& j) {
  std::vector<EstimatorId> ids;
  for (const auto& name : get_strings(j, "estimators")) {
    ids.push_back(parse_name<EstimatorId>(name, [](const std::string& s) { return parse_estimator(s); }));
  }
  if (ids.empty()) usage("estimators must not be empty");
  return ids;
}

int parse_column(const json& v) {
  if (v.is_number_unsigned()) return static_cast<int>(v.get<std::uint64_t>());
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "intercept") return 0;
    int k = 0;
    if (s.size() > 1 && s[0] == 'x') {
      const auto res = std::from_chars(s.data() + 1, s.data() + s.size(), k);
      if (res.ec == std::errc() && res.ptr == s.data() + s.size() && k >= 1) return k;
    }
    usage("unknown column '" + s + "' (use intercept or x1..xp)");
  }
  usage("columns must be names (intercept, x1..xp) or design indices");
}

std::vector<int> parse_columns(const json& v) {
  if (!v.is_array() || v.empty()) usage("columns must be a non-empty array");
  std::vector<int> cols;
  for (const auto& c : v) cols.push_back(parse_column(c));
  return cols;
}

json column_names(const std::vector<int>& cols) {
  json out = json::array();
  for (int c : cols) out.push_back(c == 0 ? std::string("intercept") : "x" + std::to_string(c));
  return out;
}

InstrumentKind parse_instrument(const std::string& s) {
  if (s == "continuous") return InstrumentKind::continuous();
  if (s == "binary") return InstrumentKind::categorical_with(2);
  if (s.rfind("categorical:", 0) == 0) {
    int k = 0;
    const auto res = std::from_chars(s.data() + 12, s.data() + s.size(), k);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && k >= 2) return InstrumentKind::categorical_with(k);
  }
  usage("instrument must be continuous, binary or categorical:K");
}

std::string instrument_name(InstrumentKind k) {
  if (!k.categorical) return "continuous";
  if (k.levels == 2) return "binary";
  return "categorical:" + std::to_string(k.levels);
}


}  // namespace

// ---------------------------------------------------------------------------

FitConfig parse_fit_config(const json& j) {
  check_keys(j, {"input", "instrument", "models", "tsls_columns", "estimators", "bootstrap", "seed", "threads",
                 "ci_level", "ci_method", "sandwich", "accept_nonroot", "out"},
             "fit config");
  FitConfig c;
  if (j.contains("input")) c.input = get_string(j, "input");
  if (j.contains("instrument")) c.instrument = parse_instrument(get_string(j, "instrument"));
  if (j.contains("models")) {
    const json& m = j.at("models");
    check_keys(m, {"delta", "delta_z", "mu_z", "mu_d", "mu_y"}, "models");
    for (const auto& [name, spec] : m.items()) {
      const Nuisance which = parse_name<Nuisance>(name, [](const std::string& s) { return parse_nuisance(s); });
      check_keys(spec, {"link", "columns"}, "models." + name);
      ModelOverride& o = c.models[static_cast<std::size_t>(which)];
      if (spec.contains("link")) {
        o.link = parse_name<Link>(get_string(spec, "link"), [](const std::string& s) { return parse_link(s); });
      }
      if (spec.contains("columns")) o.columns = parse_columns(spec.at("columns"));
    }
  }
  if (j.contains("tsls_columns")) c.tsls_columns = parse_columns(j.at("tsls_columns"));
  if (j.contains("estimators")) c.estimators = parse_estimators(j);
  if (j.contains("bootstrap")) c.bootstrap = get_int(j, "bootstrap");
  if (c.bootstrap == 1) usage("bootstrap must be 0 (disabled) or at least 2");
  if (j.contains("seed")) c.seed = get_u64(j, "seed");
  if (j.contains("threads")) c.threads = static_cast<unsigned>(get_int(j, "threads"));
  if (j.contains("ci_level")) c.ci_level = get_double(j, "ci_level");
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) usage("ci_level must lie in (0, 1)");
  if (j.contains("ci_method")) {
    const auto m = get_string(j, "ci_method");
    if (m == "percentile") c.ci_method = CiMethod::percentile;
    else if (m == "normal") c.ci_method = CiMethod::normal;
    else usage("ci_method must be percentile or normal");
  }
  if (j.contains("sandwich")) c.sandwich = get_bool(j, "sandwich");
  if (j.contains("accept_nonroot")) c.accept_nonroot = get_bool(j, "accept_nonroot");
  if (j.contains("out")) c.out = get_string(j, "out");
  return c;
}

json canonical(const FitConfig& c) {
  json models = json::object();
  for (Nuisance which : kAllNuisances) {
    const auto& o = c.models[static_cast<std::size_t>(which)];
    json m = json::object();
    if (o.link) m["link"] = to_string(*o.link);
    if (o.columns) m["columns"] = column_names(*o.columns);
    models[to_string(which)] = m;
  }
  json ests = json::array();
  for (auto id : c.estimators) ests.push_back(to_string(id));
  json j = {{"input", c.input},
            {"instrument", instrument_name(c.instrument)},
            {"models", models},
            {"estimators", ests},
            {"bootstrap", c.bootstrap},
            {"seed", c.seed},
            {"ci_level", c.ci_level},
            {"ci_method", c.ci_method == CiMethod::percentile ? "percentile" : "normal"},
            {"sandwich", c.sandwich},
            {"accept_nonroot", c.accept_nonroot}};
  j["tsls_columns"] = c.tsls_columns ? column_names(*c.tsls_columns) : json(nullptr);
  return j;
}

PipelineSpec build_pipeline(const FitConfig& config, const ObservationTable& table) {
  PipelineSpec pipeline = default_pipeline(table);
  for (Nuisance which : kAllNuisances) {
    const auto& o = config.models[static_cast<std::size_t>(which)];
    NuisanceModel& m = pipeline.models[which];
    if (o.link) m.link = *o.link;
    if (o.columns) m.columns = *o.columns;
  }
  if (config.tsls_columns) pipeline.tsls_columns = *config.tsls_columns;
  pipeline.solve_options.accept_minimizer = config.accept_nonroot;
  return pipeline;
}

FitOutput run_fit(const FitConfig& config, const ObservationTable& table) {
  FitOutput out;
  out.provenance = provenance_of(canonical(config), config.seed);
  out.replicates = config.bootstrap;
  out.seed = config.seed;
  const PipelineSpec pipeline = build_pipeline(config, table);
  out.results = estimate_all(table, pipeline, config.estimators);
  out.bootstrap.assign(out.results.size(), std::nullopt);
  out.sandwich_se.assign(out.results.size(), std::nullopt);

  if (config.bootstrap >= 2) {
    BootstrapOptions opts;
    opts.replicates = config.bootstrap;
    opts.seed = config.seed;
    opts.threads = config.threads;
    opts.level = config.ci_level;
    opts.method = config.ci_method;
    const auto summaries = bootstrap(config.estimators, table, pipeline, opts);
    for (std::size_t k = 0; k < summaries.size(); ++k) {
      out.bootstrap[k] = summaries[k];
      out.results[k].se = summaries[k].se;
      out.results[k].ci = summaries[k].ci;
    }
  }
  if (config.sandwich) {
    for (std::size_t k = 0; k < out.results.size(); ++k) {
      const EstimatorId id = out.results[k].estimator;
      if (id == EstimatorId::crude_rd || id == EstimatorId::tsls) continue;
      try {
        out.sandwich_se[k] = sandwich_se(table, pipeline, id);
      } catch (const Error& e) {
        // A saturated fit has no usable bread; the point estimate stands.
        out.results[k].notes.push_back(std::string("sandwich SE unavailable: ") + e.what());
        continue;
      }
      if (!out.results[k].se) out.results[k].se = out.sandwich_se[k];
    }
  }
  return out;
}

FitOutput run_fit(const FitConfig& config) {
  if (config.input.empty()) usage("fit needs an input CSV path");
  return run_fit(config, read_csv_file(config.input, config.instrument));
}

json to_json(const FitOutput& output) {
  json results = json::array();
  for (std::size_t k = 0; k < output.results.size(); ++k) {
    const EstimateResult& r = output.results[k];
    json diagnostics = json::object();
    for (const auto& [name, value] : r.metrics) diagnostics[name] = value;
    diagnostics["notes"] = r.notes;
    if (output.bootstrap[k]) {
      diagnostics["bootstrap_used"] = output.bootstrap[k]->used;
      diagnostics["bootstrap_failed"] = output.bootstrap[k]->failed;
    }
    if (output.sandwich_se[k]) diagnostics["sandwich_se"] = *output.sandwich_se[k];
    results.push_back({{"estimator", to_string(r.estimator)},
                       {"point", r.point},
                       {"se", r.se ? json(*r.se) : json(nullptr)},
                       {"ci", r.ci ? json::array({r.ci->first, r.ci->second}) : json(nullptr)},
                       {"n", r.n},
                       {"B", output.replicates},
                       {"seed", output.seed},
                       {"diagnostics", diagnostics}});
  }
  return {{"provenance", provenance_json(output.provenance)}, {"results", results}};
}

std::string fit_json(const FitOutput& output) { return to_json(output).dump(2) + "\n"; }

std::string fit_csv(const FitOutput& output) {
  std::ostringstream s;
  s << provenance_line(output.provenance);
  s << "estimator,point,se,ci_lower,ci_upper,n,B,seed\n";
  const double na = std::nan("");
  for (const auto& r : output.results) {
    s << to_string(r.estimator) << ',' << format_number(r.point) << ',' << format_number(r.se.value_or(na)) << ','
      << format_number(r.ci ? r.ci->first : na) << ',' << format_number(r.ci ? r.ci->second : na) << ',' << r.n
      << ',' << output.replicates << ',' << output.seed << '\n';
  }
  return s.str();
}

// ---------------------------------------------------------------------------

SimulateConfig parse_simulate_config(const json& j) {
  check_keys(j, {"setting", "scenarios", "estimators", "n", "reps", "seed", "quantile", "threads", "truth_draws",
                 "accept_nonroot", "max_failure_fraction", "out"},
             "simulate config");
  SimulateConfig c;
  auto& b = c.base;
  if (j.contains("setting")) {
    b.setting = parse_name<sim::Setting>(get_string(j, "setting"),
                                         [](const std::string& s) { return sim::parse_setting(s); });
  }
  if (j.contains("scenarios")) {
    b.scenarios.clear();
    for (const auto& name : get_strings(j, "scenarios")) {
      b.scenarios.push_back(parse_name<Scenario>(name, [](const std::string& s) { return parse_scenario(s); }));
    }
    if (b.scenarios.empty()) usage("scenarios must not be empty");
  }
  if (j.contains("estimators")) b.estimators = parse_estimators(j);
  if (j.contains("n")) b.n = get_int(j, "n");
  if (j.contains("reps")) b.reps = get_int(j, "reps");
  if (b.reps < 2) usage("reps must be at least 2");
  if (b.n < 1) usage("n must be at least 1");
  if (j.contains("seed")) b.seed = get_u64(j, "seed");
  if (j.contains("threads")) b.threads = static_cast<unsigned>(get_int(j, "threads"));
  if (j.contains("truth_draws")) b.truth_draws = static_cast<Index>(get_u64(j, "truth_draws"));
  if (b.truth_draws < 2) usage("truth_draws must be at least 2");
  if (j.contains("accept_nonroot")) b.accept_minimizer = get_bool(j, "accept_nonroot");
  if (j.contains("max_failure_fraction")) b.max_failure_fraction = get_double(j, "max_failure_fraction");
  if (j.contains("quantile")) {
    const json& q = j.at("quantile");
    if (q.is_number()) {
      c.quantiles = {q.get<double>()};
    } else if (q.is_array()) {
      for (const auto& v : q) {
        if (!v.is_number()) usage("quantile entries must be numbers");
        c.quantiles.push_back(v.get<double>());
      }
    } else {
      usage("quantile must be a number or an array of numbers");
    }
    for (double v : c.quantiles) {
      if (!(v > 0.0 && v < 1.0)) usage("quantiles must lie in (0, 1)");
    }
  }
  if (b.setting == sim::Setting::dichotomized) {
    if (c.quantiles.empty()) c.quantiles = {0.2, 0.5, 0.8};
  } else if (!c.quantiles.empty()) {
    usage("quantile applies to setting III only");
  }
  if (j.contains("out")) c.out = get_string(j, "out");
  return c;
}

json canonical(const SimulateConfig& c) {
  const auto& b = c.base;
  json scen = json::array(), ests = json::array();
  for (auto s : b.scenarios) scen.push_back(to_string(s));
  for (auto e : b.estimators) ests.push_back(to_string(e));
  return {{"setting", sim::to_string(b.setting)},
          {"scenarios", scen},
          {"estimators", ests},
          {"n", b.n},
          {"reps", b.reps},
          {"seed", b.seed},
          {"quantile", c.quantiles},
          {"truth_draws", b.truth_draws},
          {"accept_nonroot", b.accept_minimizer},
          {"max_failure_fraction", b.max_failure_fraction}};
}

SimulateOutput run_simulate(const SimulateConfig& config) {
  SimulateOutput out;
  out.provenance = provenance_of(canonical(config), config.base.seed);
  if (config.quantiles.empty()) {
    out.reports.push_back(sim::run_scenarios(config.base));
  } else {
    for (double q : config.quantiles) {
      sim::SimulationConfig b = config.base;
      b.quantile = q;
      out.reports.push_back(sim::run_scenarios(b));
    }
  }
  return out;
}

namespace {

std::string quantile_text(const sim::SimulationReport& r) {
  return r.config.quantile ? format_number(*r.config.quantile) : "NA";
}

}  // namespace

std::string simulation_table_csv(const SimulateOutput& output) {
  std::ostringstream s;
  s << provenance_line(output.provenance);
  if (output.reports.empty()) return s.str();
  const auto& ests = output.reports.front().config.estimators;
  s << "setting,quantile,metric,scenario";
  for (auto e : ests) s << ',' << to_string(e);
  s << '\n';
  struct Metric {
    const char* name;
    double (*get)(const sim::CellSummary&);
  };
  static const Metric metrics[] = {
      {"bias", [](const sim::CellSummary& c) { return c.bias; }},
      {"mcse", [](const sim::CellSummary& c) { return c.mcse; }},
      {"rmse", [](const sim::CellSummary& c) { return c.rmse; }},
      {"mean", [](const sim::CellSummary& c) { return c.mean; }},
      {"sd", [](const sim::CellSummary& c) { return c.sd; }},
      {"used", [](const sim::CellSummary& c) { return static_cast<double>(c.used); }},
      {"failed", [](const sim::CellSummary& c) { return static_cast<double>(c.failed); }},
      {"no_root", [](const sim::CellSummary& c) { return static_cast<double>(c.no_root); }},
  };
  for (const auto& r : output.reports) {
    for (const auto& m : metrics) {
      for (auto sc : r.config.scenarios) {
        s << sim::to_string(r.config.setting) << ',' << quantile_text(r) << ',' << m.name << ',' << to_string(sc);
        for (auto e : ests) s << ',' << format_number(m.get(r.cell(e, sc)));
        s << '\n';
      }
    }
  }
  return s.str();
}

std::string simulation_long_csv(const SimulateOutput& output) {
  std::ostringstream s;
  s << provenance_line(output.provenance);
  s << "setting,quantile,replicate,estimator,scenario,estimate\n";
  for (const auto& r : output.reports) {
    const std::string prefix = std::string(sim::to_string(r.config.setting)) + ',' + quantile_text(r) + ',';
    for (const auto& e : r.estimates) {
      s << prefix << e.replicate << ',' << to_string(e.estimator) << ',' << to_string(e.scenario) << ','
        << format_number(e.estimate) << '\n';
    }
  }
  return s.str();
}

std::string simulation_json(const SimulateOutput& output) {
  json reports = json::array();
  for (const auto& r : output.reports) {
    json cells = json::array();
    for (const auto& c : r.cells) {
      cells.push_back({{"estimator", to_string(c.estimator)},
                       {"scenario", to_string(c.scenario)},
                       {"mean", c.mean},
                       {"bias", c.bias},
                       {"sd", c.sd},
                       {"mcse", c.mcse},
                       {"rmse", c.rmse},
                       {"used", c.used},
                       {"failed", c.failed},
                       {"no_root", c.no_root}});
    }
    const auto& d = r.diagnostics;
    reports.push_back({{"setting", sim::to_string(r.config.setting)},
                       {"quantile", r.config.quantile ? json(*r.config.quantile) : json(nullptr)},
                       {"n", r.config.n},
                       {"reps", r.config.reps},
                       {"truth", {{"value", r.truth.value}, {"mcse", r.truth.mcse}}},
                       {"diagnostics",
                        {{"bounded_violations", d.bounded_violations},
                         {"max_tr_gap", d.max_tr_gap},
                         {"clamped_rows", d.clamped_rows},
                         {"total_rows", d.total_rows},
                         {"failure_samples", d.failure_samples}}},
                       {"cells", cells}});
  }
  return json{{"provenance", provenance_json(output.provenance)}, {"reports", reports}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

const char* law_of(const std::string& id) {
  if (id.rfind("stein", 0) == 0 || id.find("gaussian") != std::string::npos || id == "dichotomized_mean_zero") {
    return "gaussian";
  }
  if (id.find("uniform") != std::string::npos || id == "weight_normalization") return "uniform";
  if (id.rfind("categorical", 0) == 0) return "categorical";
  return "other";
}

}  // namespace

RieszConfig parse_riesz_config(const json& j) {
  check_keys(j, {"law", "cases", "tolerance"}, "riesz-check config");
  RieszConfig c;
  if (j.contains("law")) c.law = get_string(j, "law");
  if (c.law != "all" && c.law != "gaussian" && c.law != "uniform" && c.law != "categorical") {
    usage("law must be all, gaussian, uniform or categorical");
  }
  if (j.contains("cases")) c.cases = get_strings(j, "cases");
  for (const auto& id : c.cases) {
    if (!riesz::is_self_check(id)) usage("unknown case id '" + id + "'");
  }
  if (j.contains("tolerance")) c.tolerance = get_double(j, "tolerance");
  if (!(c.tolerance > 0.0)) usage("tolerance must be positive");
  return c;
}

std::vector<std::string> selected_cases(const RieszConfig& config) {
  std::vector<std::string> ids;
  const auto& pool = config.cases.empty() ? riesz::self_check_ids() : config.cases;
  for (const auto& id : pool) {
    if (config.law == "all" || config.law == law_of(id)) ids.push_back(id);
  }
  return ids;
}

RieszOutput run_riesz_check(const RieszConfig& config) {
  RieszOutput out;
  out.tolerance = config.tolerance;
  out.checks = riesz::run_self_checks(selected_cases(config), config.tolerance);
  out.all_pass = std::all_of(out.checks.begin(), out.checks.end(), [](const auto& c) { return c.pass; });
  return out;
}

std::string riesz_json(const RieszOutput& output) {
  json checks = json::array();
  for (const auto& c : output.checks) {
    checks.push_back({{"id", c.id}, {"description", c.description}, {"residual", c.residual}, {"pass", c.pass}});
  }
  return json{{"tolerance", output.tolerance}, {"all_pass", output.all_pass}, {"checks", checks}}.dump(2) + "\n";
}

std::string error_json(const std::string& kind, const std::string& message) {
  return json{{"error", {{"kind", kind}, {"message", message}}}}.dump() + "\n";
}

}  // namespace ivate::app

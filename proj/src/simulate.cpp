#include "ivate/simulate.hpp"

#include "ivate/error.hpp"
#include "ivate/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ivate::sim {

const char* to_string(Setting s) {
  switch (s) {
    case Setting::continuous: return "I";
    case Setting::binary: return "II";
    case Setting::dichotomized: return "III";
  }
  return "?";
}

Setting parse_setting(std::string_view name) {
  if (name == "I" || name == "1") return Setting::continuous;
  if (name == "II" || name == "2") return Setting::binary;
  if (name == "III" || name == "3") return Setting::dichotomized;
  fail(ErrorKind::invalid_argument, "unknown setting '" + std::string(name) + "' (expected I, II or III)");
}

namespace {
Vector vec3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}
}  // namespace

DgpParams DgpParams::setting1() {
  DgpParams p;
  p.alpha = vec3(0.1, 0.4, -0.5);
  p.beta = vec3(0.4, 0.1, 0.5);
  p.zeta = vec3(0.1, -0.5, 1.0);
  p.iota = vec3(0.5, 0.5, -1.0);
  p.theta = vec3(0.1, -0.4, 0.8);
  return p;
}

DgpParams DgpParams::setting2() {
  DgpParams p = setting1();
  p.beta = vec3(0.2, 0.1, 0.5);
  p.zeta = vec3(-0.2, 0.2, 0.2);
  p.iota = vec3(0.2, 0.5, -0.5);
  return p;
}

DgpParams DgpParams::for_setting(Setting s) { return s == Setting::binary ? setting2() : setting1(); }

void DgpParams::validate() const {
  for (const Vector* v : {&alpha, &beta, &zeta, &iota, &theta}) {
    if (v->size() != 3) fail(ErrorKind::invalid_argument, "DGP coefficient vectors must have length 3");
    if (!v->allFinite()) fail(ErrorKind::invalid_argument, "DGP coefficients must be finite");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorKind::invalid_argument, "sigma must be positive");
  if (!(nu > 0.0 && nu < 1.0)) fail(ErrorKind::invalid_argument, "nu must lie in (0, 1)");
  if (!std::isfinite(kappa)) fail(ErrorKind::invalid_argument, "kappa must be finite");
}

double bridge_noise(double nu, double u) {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorKind::invalid_argument, "bridge noise needs u strictly inside (0, 1)");
  const double pi = std::numbers::pi;
  return std::log(std::sin(nu * pi * u) / std::sin(nu * pi * (1.0 - u)));
}

namespace {

struct RowX {
  double x2, x3;
  double dot(const Vector& c) const { return c[0] + c[1] * x2 + c[2] * x3; }
};

double clamp_probability(double p, Index& clamped) {
  if (p < 0.0 || p > 1.0) {
    ++clamped;
    return std::clamp(p, 0.0, 1.0);
  }
  return p;
}

GeneratedData finish(Vector y, Vector d, Vector z, Matrix x, InstrumentKind kind, Vector u, Vector s,
                     Index clamped, bool keep_latent) {
  const Index n = y.size();
  if (static_cast<double>(clamped) > 0.01 * static_cast<double>(n)) {
    fail(ErrorKind::invalid_argument, "outcome probability left [0, 1] in " + std::to_string(clamped) + " of " +
                                          std::to_string(n) + " rows; parameters are outside the valid range");
  }
  GeneratedData out{validate(RawTable{std::move(y), std::move(d), std::move(z), std::move(x), kind}), {}, {},
                    clamped};
  if (keep_latent) {
    out.u = std::move(u);
    out.s = std::move(s);
  }
  return out;
}

}  // namespace

GeneratedData gen_setting1(const DgpParams& params, Index n, Philox& rng, bool keep_latent) {
  params.validate();
  if (n < 1) fail(ErrorKind::invalid_argument, "sample size must be at least 1");
  const double s2 = params.sigma * params.sigma;
  Vector y(n), d(n), z(n), u(n), s(n);
  Matrix x(n, 3);
  Index clamped = 0;
  for (Index i = 0; i < n; ++i) {
    const RowX r{rng.uniform(), rng.bernoulli(0.4) ? 1.0 : 0.0};
    const double ui = rng.uniform();
    const double ix = r.dot(params.iota);
    const double bx = r.dot(params.beta);
    const double zx = r.dot(params.zeta);
    const double m = expit(ix);
    const double pi1 = zx + (1.0 - m) * bx;
    const double pi0 = zx - m * bx;
    const bool si = rng.bernoulli(m);
    const double zi = (si ? pi1 : pi0) + params.sigma * rng.normal();
    const double m1 = ix + bx / s2 * zi - 0.5 * (pi1 * pi1 - pi0 * pi0) / s2;
    const bool di = rng.bernoulli(expit((m1 + bridge_noise(params.nu, ui)) / params.nu));
    const double py = std::tanh(r.dot(params.alpha)) * (expit(m1) - m) + expit(r.dot(params.theta)) +
                      params.kappa * (2.0 * ui - 1.0);
    const bool yi = rng.bernoulli(clamp_probability(py, clamped));
    x(i, 0) = 1.0;
    x(i, 1) = r.x2;
    x(i, 2) = r.x3;
    z[i] = zi;
    d[i] = di ? 1.0 : 0.0;
    y[i] = yi ? 1.0 : 0.0;
    u[i] = ui;
    s[i] = si ? 1.0 : 0.0;
  }
  return finish(std::move(y), std::move(d), std::move(z), std::move(x), InstrumentKind::continuous(),
                std::move(u), std::move(s), clamped, keep_latent);
}

GeneratedData gen_setting2(const DgpParams& params, Index n, Philox& rng, bool keep_latent) {
  params.validate();
  if (n < 1) fail(ErrorKind::invalid_argument, "sample size must be at least 1");
  Vector y(n), d(n), z(n), u(n);
  Matrix x(n, 3);
  Index clamped = 0;
  for (Index i = 0; i < n; ++i) {
    const RowX r{rng.uniform(), rng.bernoulli(0.4) ? 1.0 : 0.0};
    const double ui = rng.uniform();
    const double ix = r.dot(params.iota);
    const double ez = expit(r.dot(params.zeta));
    const double tb = std::tanh(r.dot(params.beta));
    const double m = expit(ix);
    const double pi1 = ez + (1.0 - m) * tb;
    const double pi0 = ez - m * tb;
    if (!(pi1 > 0.0 && pi1 < 1.0 && pi0 > 0.0 && pi0 < 1.0)) {
      fail(ErrorKind::invalid_argument, "Setting II parameters give pi1 or pi0 outside (0, 1) at x = (1, " +
                                            std::to_string(r.x2) + ", " + std::to_string(r.x3) + ")");
    }
    const bool zi = rng.bernoulli(ez);
    const double m2 = ix + std::log(pi1 * (1.0 - pi0) / (pi0 * (1.0 - pi1))) * (zi ? 1.0 : 0.0) +
                      std::log((1.0 - pi1) / (1.0 - pi0));
    const bool di = rng.bernoulli(expit((m2 + bridge_noise(params.nu, ui)) / params.nu));
    const double py = std::tanh(r.dot(params.alpha)) * (expit(m2) - m) + expit(r.dot(params.theta)) +
                      params.kappa * (2.0 * ui - 1.0);
    const bool yi = rng.bernoulli(clamp_probability(py, clamped));
    x(i, 0) = 1.0;
    x(i, 1) = r.x2;
    x(i, 2) = r.x3;
    z[i] = zi ? 1.0 : 0.0;
    d[i] = di ? 1.0 : 0.0;
    y[i] = yi ? 1.0 : 0.0;
    u[i] = ui;
  }
  return finish(std::move(y), std::move(d), std::move(z), std::move(x), InstrumentKind::categorical_with(2), std::move(u),
                Vector(), clamped, keep_latent);
}

MonteCarloValue true_ate(const DgpParams& params, Index draws, std::uint64_t seed) {
  params.validate();
  if (draws < 2) fail(ErrorKind::invalid_argument, "true_ate needs at least 2 draws");
  Philox rng(seed, kTruthStream);
  // Shifted sums keep the variance exact when every draw is identical.
  double first = 0.0, sum = 0.0, sq = 0.0;
  for (Index i = 0; i < draws; ++i) {
    const RowX r{rng.uniform(), rng.bernoulli(0.4) ? 1.0 : 0.0};
    const double v = std::tanh(r.dot(params.alpha));
    if (i == 0) first = v;
    sum += v - first;
    sq += (v - first) * (v - first);
  }
  const double m = static_cast<double>(draws);
  const double var = std::max(0.0, (sq - sum * sum / m) / (m - 1.0));
  return {first + sum / m, std::sqrt(var / m)};
}

// ---------------------------------------------------------------------------

const CellSummary& SimulationReport::cell(EstimatorId estimator, Scenario scenario) const {
  for (const auto& c : cells) {
    if (c.estimator == estimator && c.scenario == scenario) return c;
  }
  fail(ErrorKind::invalid_argument, std::string("no cell for ") + to_string(estimator) + " / " +
                                        ivate::to_string(scenario));
}

namespace {

struct ReplicateOutput {
  std::vector<double> values;  // scenario-major; NaN marks a failure
  std::vector<char> no_root;
  std::string first_error;
  Index clamped = 0;
  Index rows = 0;
  double tr_gap = 0.0;
  long violations = 0;
};

double metric(const EstimateResult& r, std::string_view name) {
  for (const auto& [key, value] : r.metrics) {
    if (key == name) return value;
  }
  return 0.0;
}

ObservationTable generate(const SimulationConfig& config, const DgpParams& params, Philox& rng,
                          ReplicateOutput& out) {
  GeneratedData data = config.setting == Setting::binary ? gen_setting2(params, config.n, rng)
                                                         : gen_setting1(params, config.n, rng);
  out.clamped = data.clamped;
  out.rows = config.n;
  if (config.setting == Setting::dichotomized) return dichotomize(data.table, *config.quantile);
  return std::move(data.table);
}

ReplicateOutput run_replicate(const SimulationConfig& config, const DgpParams& params, int r) {
  const std::size_t k = config.estimators.size();
  ReplicateOutput out;
  out.values.assign(config.scenarios.size() * k, std::numeric_limits<double>::quiet_NaN());
  out.no_root.assign(out.values.size(), 0);
  auto note = [&](const std::string& where, const char* what) {
    if (out.first_error.empty()) out.first_error = "replicate " + std::to_string(r) + ", " + where + ": " + what;
  };

  Philox rng(config.seed, static_cast<std::uint64_t>(r));
  std::optional<ObservationTable> table;
  try {
    table = generate(config, params, rng, out);
  } catch (const Error& e) {
    note("data generation", e.what());
    return out;
  }

  const bool z_binary = table->z_kind().binary();
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    ScenarioSpec spec;
    spec.name = config.scenarios[s];
    PipelineSpec pipeline{models_for(spec, true, z_binary), spec.full_columns(), {}};
    pipeline.solve_options.accept_minimizer = config.accept_minimizer;
    std::vector<std::optional<EstimateResult>> results(k);
    try {
      auto all = estimate_all(*table, pipeline, config.estimators);
      for (std::size_t j = 0; j < k; ++j) results[j] = std::move(all[j]);
    } catch (const Error&) {
      // Retry one at a time so a failure in a shared nuisance is attributed per estimator.
      for (std::size_t j = 0; j < k; ++j) {
        try {
          results[j] = estimate(*table, pipeline, config.estimators[j]);
        } catch (const Error& e) {
          note(std::string(ivate::to_string(spec.name)) + "/" + to_string(config.estimators[j]), e.what());
        }
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (!results[j] || !std::isfinite(results[j]->point)) continue;
      const EstimateResult& res = *results[j];
      out.values[s * k + j] = res.point;
      const bool no_root = std::any_of(res.notes.begin(), res.notes.end(),
                                       [](const std::string& note) { return note.starts_with("no finite root"); });
      out.no_root[s * k + j] = no_root ? 1 : 0;
      if (is_bounded(res.estimator) && std::abs(res.point) > 1.0) ++out.violations;
      if (res.estimator == EstimatorId::delta_b_tr && !no_root) {
        out.tr_gap = std::max(out.tr_gap, std::abs(metric(res, "correction_mean")));
      }
    }
  }
  return out;
}

CellSummary summarize(const std::vector<double>& values, double truth, int failed) {
  CellSummary c;
  c.used = static_cast<int>(values.size());
  c.failed = failed;
  if (values.empty()) {
    c.mean = c.bias = c.sd = c.mcse = c.rmse = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  const double shift = values.front();
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    sum += v - shift;
    sq += (v - shift) * (v - shift);
  }
  const double m = static_cast<double>(values.size());
  c.mean = shift + sum / m;
  c.bias = c.mean - truth;
  c.sd = values.size() > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / m) / (m - 1.0))) : 0.0;
  c.mcse = c.sd / std::sqrt(m);
  c.rmse = std::sqrt(c.bias * c.bias + c.sd * c.sd);
  return c;
}

}  // namespace

SimulationReport run_scenarios(const SimulationConfig& config) {
  if (config.reps < 2) fail(ErrorKind::invalid_argument, "reps must be at least 2");
  if (config.n < 1) fail(ErrorKind::invalid_argument, "n must be at least 1");
  if (config.scenarios.empty() || config.estimators.empty()) {
    fail(ErrorKind::invalid_argument, "at least one scenario and one estimator are required");
  }
  if (config.setting == Setting::dichotomized) {
    if (!config.quantile) fail(ErrorKind::invalid_argument, "Setting III needs a dichotomization quantile");
    if (!(*config.quantile > 0.0 && *config.quantile < 1.0)) {
      fail(ErrorKind::invalid_argument, "dichotomization quantile must lie in (0, 1)");
    }
  }
  const DgpParams params = config.params ? *config.params : DgpParams::for_setting(config.setting);
  params.validate();

  SimulationReport report;
  report.config = config;
  report.truth = true_ate(params, config.truth_draws, config.seed);

  std::vector<ReplicateOutput> reps(static_cast<std::size_t>(config.reps));
  parallel_for(reps.size(), config.threads,
               [&](std::size_t r) { reps[r] = run_replicate(config, params, static_cast<int>(r)); });

  const std::size_t k = config.estimators.size();
  auto& diag = report.diagnostics;
  for (const auto& rep : reps) {
    diag.clamped_rows += rep.clamped;
    diag.total_rows += rep.rows;
    diag.bounded_violations += rep.violations;
    diag.max_tr_gap = std::max(diag.max_tr_gap, rep.tr_gap);
    if (!rep.first_error.empty() && diag.failure_samples.size() < 5) diag.failure_samples.push_back(rep.first_error);
  }
  if (static_cast<double>(diag.clamped_rows) > 0.01 * static_cast<double>(std::max<long>(diag.total_rows, 1))) {
    fail(ErrorKind::invalid_argument, "outcome probabilities were clamped in more than 1% of simulated rows");
  }

  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> values;
      int failed = 0, no_root = 0;
      for (std::size_t r = 0; r < reps.size(); ++r) {
        const double v = reps[r].values[s * k + j];
        if (std::isnan(v)) {
          ++failed;
          continue;
        }
        no_root += reps[r].no_root[s * k + j];
        values.push_back(v);
      }
      CellSummary c = summarize(values, report.truth.value, failed);
      c.no_root = no_root;
      c.estimator = config.estimators[j];
      c.scenario = config.scenarios[s];
      report.cells.push_back(c);
    }
  }
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
      for (std::size_t j = 0; j < k; ++j) {
        const double v = reps[r].values[s * k + j];
        if (!std::isnan(v)) report.estimates.push_back({static_cast<int>(r), config.estimators[j], config.scenarios[s], v});
      }
    }
  }

  for (const auto& c : report.cells) {
    if (static_cast<double>(c.failed) > config.max_failure_fraction * static_cast<double>(config.reps)) {
      std::string msg = std::string("excess replicate failures for ") + to_string(c.estimator) + " / " +
                        ivate::to_string(c.scenario) + ": " + std::to_string(c.failed) + " of " +
                        std::to_string(config.reps);
      if (!diag.failure_samples.empty()) msg += " (first: " + diag.failure_samples.front() + ")";
      fail(ErrorKind::excess_failures, msg);
    }
  }
  return report;
}

}  // namespace ivate::sim

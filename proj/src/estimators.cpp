#include "ivate/estimators.hpp"

#include "ivate/error.hpp"
#include "ivate/parallel.hpp"
#include "ivate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ivate {

const char* to_string(EstimatorId id) {
  switch (id) {
    case EstimatorId::delta1: return "delta1";
    case EstimatorId::delta2: return "delta2";
    case EstimatorId::delta_b2: return "delta_b2";
    case EstimatorId::delta3: return "delta3";
    case EstimatorId::delta_tr: return "delta_tr";
    case EstimatorId::delta_b_tr: return "delta_b_tr";
    case EstimatorId::crude_rd: return "crude_rd";
    case EstimatorId::tsls: return "tsls";
  }
  return "?";
}

EstimatorId parse_estimator(std::string_view name) {
  for (auto id : {EstimatorId::delta1, EstimatorId::delta2, EstimatorId::delta_b2, EstimatorId::delta3,
                  EstimatorId::delta_tr, EstimatorId::delta_b_tr, EstimatorId::crude_rd, EstimatorId::tsls}) {
    if (name == to_string(id)) return id;
  }
  fail(ErrorKind::invalid_argument, "unknown estimator '" + std::string(name) + "'");
}

bool is_bounded(EstimatorId id) { return id == EstimatorId::delta_b2 || id == EstimatorId::delta_b_tr; }

namespace {

glm::FitResult fit_glm(const ObservationTable& table, const NuisanceModel& model, const Vector& response,
                       const char* what) {
  const Matrix x = design(table, model.columns);
  try {
    if (model.link == Link::expit) return glm::fit_logistic(x, response);
    if (model.link == Link::identity) return glm::fit_linear(x, response);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(what) + ": " + e.what());
  }
  fail(ErrorKind::invalid_argument, std::string(what) + " must use an identity or expit link");
}

Vector delta_fitted(const ObservationTable& table, const NuisanceEstimates& nu, const Vector& alpha) {
  return fitted(table, nu.spec.delta, alpha);
}

EstimateResult make_result(EstimatorId id, const ObservationTable& table, double point) {
  EstimateResult r;
  r.estimator = id;
  r.point = point;
  r.n = table.n();
  return r;
}

void add_solver_metrics(EstimateResult& r, const SolveReport& report) {
  r.metrics.emplace_back("solver_iterations", report.iterations);
  r.metrics.emplace_back("solver_residual_norm", report.residual_norm);
  r.metrics.emplace_back("solver_damping_events", report.damping_events);
  r.metrics.emplace_back("solver_converged", report.converged ? 1.0 : 0.0);
}

}  // namespace

NuisanceEstimates fit_nuisances(const ObservationTable& table, const WorkingModelSpec& spec,
                                std::optional<Phi2Mode> mode, const SolveOptions& options) {
  if (table.z_kind().categorical && table.z_kind().levels > 2) {
    fail(ErrorKind::unsupported, "estimators support continuous or binary instruments only (got " +
                                     std::to_string(table.z_kind().levels) + " levels)");
  }
  check_models(spec, table);

  NuisanceEstimates nu;
  nu.spec = spec;
  nu.solve_options = options;
  nu.zeta_fit = fit_glm(table, spec.mu_z, table.z(), "mu_z");
  try {
    nu.iota_fit = fit_glm(table, spec.mu_d, table.d(), "mu_d");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::separation) throw;
    fail(ErrorKind::denominator_floor,
         std::string("propensity floor violated: treatment is perfectly predicted (") + e.what() + ")");
  }
  nu.theta_fit = fit_glm(table, spec.mu_y, table.y(), "mu_y");
  nu.zeta = nu.zeta_fit.coefficients;
  nu.iota = nu.iota_fit.coefficients;
  nu.theta = nu.theta_fit.coefficients;

  auto beta_fit = estimate_beta_ipw(table, spec, nu.iota, options);
  nu.beta = beta_fit.coefficients;
  nu.beta_report = beta_fit.report;
  nu.notes.insert(nu.notes.end(), beta_fit.notes.begin(), beta_fit.notes.end());

  if (mode) fit_alpha_dr(table, nu, *mode);
  return nu;
}

void fit_alpha_dr(const ObservationTable& table, NuisanceEstimates& nu, Phi2Mode mode) {
  auto alpha_fit = estimate_alpha_dr(table, nu.spec, nu.zeta, nu.iota, nu.theta, nu.beta, mode, nu.solve_options);
  nu.phi2_mode = mode;
  nu.alpha = alpha_fit.coefficients;
  nu.alpha_report = alpha_fit.report;
  nu.notes.insert(nu.notes.end(), alpha_fit.notes.begin(), alpha_fit.notes.end());
}

Vector residual_e(const ObservationTable& table, const NuisanceEstimates& nu) {
  const Vector mu_y = fitted(table, nu.spec.mu_y, nu.theta);
  const Vector mu_d = fitted(table, nu.spec.mu_d, nu.iota);
  const Vector delta = delta_fitted(table, nu, nu.alpha);
  return (table.y() - mu_y).array() - delta.array() * (table.d() - mu_d).array();
}

EstimateResult delta_tr(const ObservationTable& table, const NuisanceEstimates& nu) {
  const Vector den = covariance_denominator(table, nu.spec, nu.beta, nu.iota);
  const Vector mu_z = fitted(table, nu.spec.mu_z, nu.zeta);
  const Vector correction = (table.z() - mu_z).array() * residual_e(table, nu).array() / den.array();
  const Vector delta = delta_fitted(table, nu, nu.alpha);
  EstimateResult r = make_result(EstimatorId::delta_tr, table, (correction + delta).mean());
  r.metrics.emplace_back("correction_mean", correction.mean());
  r.metrics.emplace_back("plugin_mean", delta.mean());
  return r;
}

EstimateResult delta_b_tr(const ObservationTable& table, const NuisanceEstimates& nu) {
  if (nu.phi2_mode != Phi2Mode::bounded) {
    fail(ErrorKind::invalid_argument, "delta_b_tr needs nuisances fit with bounded phi2");
  }
  const Vector den = covariance_denominator(table, nu.spec, nu.beta, nu.iota);
  const Vector mu_z = fitted(table, nu.spec.mu_z, nu.zeta);
  const Vector correction = (table.z() - mu_z).array() * residual_e(table, nu).array() / den.array();
  EstimateResult r = make_result(EstimatorId::delta_b_tr, table, delta_fitted(table, nu, nu.alpha).mean());
  r.metrics.emplace_back("correction_mean", correction.mean());
  add_solver_metrics(r, nu.alpha_report);
  return r;
}

EstimateResult delta_1(const ObservationTable& table, const NuisanceEstimates& nu) {
  const auto fit = estimate_alpha_1(table, nu.spec, nu.theta, nu.iota, nu.solve_options);
  EstimateResult r = make_result(EstimatorId::delta1, table, delta_fitted(table, nu, fit.coefficients).mean());
  add_solver_metrics(r, fit.report);
  r.notes = fit.notes;
  return r;
}

EstimateResult delta_2(const ObservationTable& table, const NuisanceEstimates& nu) {
  const Vector den = covariance_denominator(table, nu.spec, nu.beta, nu.iota);
  const Vector mu_z = fitted(table, nu.spec.mu_z, nu.zeta);
  const Vector terms = (table.z() - mu_z).array() * table.y().array() / den.array();
  return make_result(EstimatorId::delta2, table, terms.mean());
}

EstimateResult delta_b2(const ObservationTable& table, const NuisanceEstimates& nu) {
  const auto fit = estimate_alpha_2b(table, nu.spec, nu.zeta, nu.iota, nu.beta, nu.solve_options);
  EstimateResult r = make_result(EstimatorId::delta_b2, table, delta_fitted(table, nu, fit.coefficients).mean());
  add_solver_metrics(r, fit.report);
  r.notes = fit.notes;
  return r;
}

EstimateResult delta_3(const ObservationTable& table, const NuisanceEstimates& nu) {
  const auto fit = estimate_alpha_3(table, nu.spec, nu.zeta, nu.solve_options);
  EstimateResult r = make_result(EstimatorId::delta3, table, delta_fitted(table, nu, fit.coefficients).mean());
  add_solver_metrics(r, fit.report);
  r.notes = fit.notes;
  return r;
}

EstimateResult crude_rd(const ObservationTable& table) {
  double treated = 0.0, control = 0.0, y1 = 0.0, y0 = 0.0;
  for (Index i = 0; i < table.n(); ++i) {
    if (table.d()[i] == 1.0) {
      treated += 1.0;
      y1 += table.y()[i];
    } else {
      control += 1.0;
      y0 += table.y()[i];
    }
  }
  if (treated == 0.0 || control == 0.0) fail(ErrorKind::data, "crude risk difference needs both treatment arms");
  return make_result(EstimatorId::crude_rd, table, y1 / treated - y0 / control);
}

EstimateResult tsls(const ObservationTable& table, std::span<const int> covariate_columns) {
  const Matrix covariates = design(table, covariate_columns);
  const Index k = covariates.cols();
  Matrix first(table.n(), k + 1);
  first.col(0) = table.z();
  first.rightCols(k) = covariates;
  const auto stage1 = glm::fit_linear(first, table.d());
  Matrix second(table.n(), k + 1);
  second.col(0) = first * stage1.coefficients;
  second.rightCols(k) = covariates;
  const auto stage2 = glm::fit_linear(second, table.y());
  EstimateResult r = make_result(EstimatorId::tsls, table, stage2.coefficients[0]);
  r.metrics.emplace_back("first_stage_instrument_coef", stage1.coefficients[0]);
  return r;
}

PipelineSpec default_pipeline(const ObservationTable& table) {
  std::vector<int> all(static_cast<std::size_t>(table.p()));
  std::iota(all.begin(), all.end(), 0);
  return {default_models(table, all), all, {}};
}

std::vector<EstimateResult> estimate_all(const ObservationTable& table, const PipelineSpec& pipeline,
                                         std::span<const EstimatorId> ids) {
  auto wants = [&](EstimatorId which) { return std::find(ids.begin(), ids.end(), which) != ids.end(); };
  const bool need_base = std::any_of(ids.begin(), ids.end(), [](EstimatorId id) {
    return id != EstimatorId::crude_rd && id != EstimatorId::tsls;
  });
  std::optional<NuisanceEstimates> base, plain, bounded;
  if (need_base) base = fit_nuisances(table, pipeline.models, std::nullopt, pipeline.solve_options);
  if (wants(EstimatorId::delta_tr)) {
    plain = *base;
    fit_alpha_dr(table, *plain, Phi2Mode::plain);
  }
  if (wants(EstimatorId::delta_b_tr)) {
    bounded = *base;
    fit_alpha_dr(table, *bounded, Phi2Mode::bounded);
  }

  std::vector<EstimateResult> out;
  out.reserve(ids.size());
  for (EstimatorId id : ids) {
    const NuisanceEstimates* nu = nullptr;
    switch (id) {
      case EstimatorId::delta1: out.push_back(delta_1(table, *base)); nu = &*base; break;
      case EstimatorId::delta2: out.push_back(delta_2(table, *base)); nu = &*base; break;
      case EstimatorId::delta_b2: out.push_back(delta_b2(table, *base)); nu = &*base; break;
      case EstimatorId::delta3: out.push_back(delta_3(table, *base)); nu = &*base; break;
      case EstimatorId::delta_tr: out.push_back(delta_tr(table, *plain)); nu = &*plain; break;
      case EstimatorId::delta_b_tr: out.push_back(delta_b_tr(table, *bounded)); nu = &*bounded; break;
      case EstimatorId::crude_rd: out.push_back(crude_rd(table)); break;
      case EstimatorId::tsls: out.push_back(tsls(table, pipeline.tsls_columns)); break;
    }
    if (nu) out.back().notes.insert(out.back().notes.end(), nu->notes.begin(), nu->notes.end());
  }
  return out;
}

EstimateResult estimate(const ObservationTable& table, const PipelineSpec& pipeline, EstimatorId id) {
  const EstimatorId ids[] = {id};
  return estimate_all(table, pipeline, ids).front();
}

// ---------------------------------------------------------------------------

double sandwich_se(const ObservationTable& table, const PipelineSpec& pipeline, EstimatorId id) {
  if (id == EstimatorId::crude_rd || id == EstimatorId::tsls) {
    fail(ErrorKind::unsupported, std::string("sandwich variance is not provided for ") + to_string(id));
  }
  const WorkingModelSpec& spec = pipeline.models;
  const Phi2Mode mode = id == EstimatorId::delta_b_tr ? Phi2Mode::bounded : Phi2Mode::plain;
  const bool uses_alpha_dr = id == EstimatorId::delta_tr || id == EstimatorId::delta_b_tr;
  const NuisanceEstimates nu =
      fit_nuisances(table, spec, uses_alpha_dr ? std::optional(mode) : std::nullopt, pipeline.solve_options);

  Vector alpha_k;
  switch (id) {
    case EstimatorId::delta1:
      alpha_k = estimate_alpha_1(table, spec, nu.theta, nu.iota, pipeline.solve_options).coefficients;
      break;
    case EstimatorId::delta_b2:
      alpha_k = estimate_alpha_2b(table, spec, nu.zeta, nu.iota, nu.beta, pipeline.solve_options).coefficients;
      break;
    case EstimatorId::delta3:
      alpha_k = estimate_alpha_3(table, spec, nu.zeta, pipeline.solve_options).coefficients;
      break;
    case EstimatorId::delta_tr:
    case EstimatorId::delta_b_tr: alpha_k = nu.alpha; break;
    default: break;
  }
  const double point = estimate(table, pipeline, id).point;

  const Index qz = nu.zeta.size(), qi = nu.iota.size(), qt = nu.theta.size(), qb = nu.beta.size();
  const Index qa = alpha_k.size();
  const Index dim = qz + qi + qt + qb + qa + 1;
  Vector packed(dim);
  packed << nu.zeta, nu.iota, nu.theta, nu.beta, alpha_k, point;

  EstimatingEquation stacked;
  stacked.dimension = static_cast<int>(dim);
  stacked.contributions = [&, qz, qi, qt, qb, qa, dim](const Vector& v) {
    Index at = 0;
    auto take = [&](Index len) {
      Vector part = v.segment(at, len);
      at += len;
      return part;
    };
    const Vector zeta = take(qz), iota = take(qi), theta = take(qt), beta = take(qb), alpha = take(qa);
    const double delta_value = v[dim - 1];

    Matrix rows(table.n(), dim);
    Index col = 0;
    auto put = [&](const Matrix& block) {
      rows.middleCols(col, block.cols()) = block;
      col += block.cols();
    };
    put(score_equation(table, spec.mu_z, table.z()).contributions(zeta));
    put(score_equation(table, spec.mu_d, table.d()).contributions(iota));
    put(score_equation(table, spec.mu_y, table.y()).contributions(theta));
    put(beta_ipw_equation(table, spec, iota).contributions(beta));

    Vector delta_rows;
    switch (id) {
      case EstimatorId::delta1:
        put(alpha_1_equation(table, spec, theta, iota).contributions(alpha));
        delta_rows = fitted(table, spec.delta, alpha);
        break;
      case EstimatorId::delta_b2:
        put(alpha_2b_equation(table, spec, zeta, iota, beta).contributions(alpha));
        delta_rows = fitted(table, spec.delta, alpha);
        break;
      case EstimatorId::delta3:
        put(alpha_3_equation(table, spec, zeta).contributions(alpha));
        delta_rows = fitted(table, spec.delta, alpha);
        break;
      case EstimatorId::delta2: {
        const Vector den = covariance_denominator(table, spec, beta, iota);
        delta_rows = (table.z() - fitted(table, spec.mu_z, zeta)).array() * table.y().array() / den.array();
        break;
      }
      case EstimatorId::delta_tr:
      case EstimatorId::delta_b_tr: {
        put(alpha_dr_equation(table, spec, zeta, iota, theta, beta, mode).contributions(alpha));
        delta_rows = fitted(table, spec.delta, alpha);
        if (id == EstimatorId::delta_tr) {
          const Vector den = covariance_denominator(table, spec, beta, iota);
          const Vector e = (table.y() - fitted(table, spec.mu_y, theta)).array() -
                           delta_rows.array() * (table.d() - fitted(table, spec.mu_d, iota)).array();
          delta_rows.array() += (table.z() - fitted(table, spec.mu_z, zeta)).array() * e.array() / den.array();
        }
        break;
      }
      default: break;
    }
    rows.col(col) = delta_rows.array() - delta_value;
    return rows;
  };

  const Matrix bread = finite_difference_jacobian(stacked, packed);
  const Matrix psi = stacked.contributions(packed);
  const double n = static_cast<double>(table.n());
  const Matrix meat = psi.transpose() * psi / n;
  Eigen::FullPivLU<Matrix> lu(bread);
  if (!lu.isInvertible()) fail(ErrorKind::singular_jacobian, "sandwich bread matrix is singular");
  const Matrix inv = lu.inverse();
  const Matrix cov = inv * meat * inv.transpose() / n;
  return std::sqrt(cov(dim - 1, dim - 1));
}

// ---------------------------------------------------------------------------

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

// Sample SD about the first value, so identical inputs give exactly zero.
double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double shift = v.front();
  double sum = 0.0, sq = 0.0;
  for (double x : v) {
    sum += x - shift;
    sq += (x - shift) * (x - shift);
  }
  const double m = static_cast<double>(v.size());
  return std::sqrt(std::max(0.0, (sq - sum * sum / m) / (m - 1.0)));
}

std::vector<Index> resample_rows(Index n, std::uint64_t seed, std::uint64_t b) {
  Philox rng(seed, b);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  return rows;
}

BootstrapSummary summarize(const std::vector<std::optional<double>>& draws, const BootstrapOptions& options,
                           const std::function<double()>& point, const char* what) {
  std::vector<double> ok;
  for (const auto& d : draws) {
    if (d) ok.push_back(*d);
  }
  BootstrapSummary s;
  s.used = static_cast<int>(ok.size());
  s.failed = static_cast<int>(draws.size() - ok.size());
  if (static_cast<double>(s.failed) > options.max_failure_fraction * static_cast<double>(draws.size()) ||
      s.used < 2) {
    fail(ErrorKind::excess_failures, std::string("bootstrap for ") + what + ": " + std::to_string(s.failed) +
                                         " of " + std::to_string(draws.size()) + " resamples failed");
  }
  s.se = sample_sd(ok);
  const double tail = (1.0 - options.level) / 2.0;
  if (options.method == CiMethod::percentile) {
    s.ci = {empirical_quantile(ok, tail), empirical_quantile(ok, 1.0 - tail)};
  } else {
    // Two-sided normal quantile by bisection on erfc keeps this free of extra dependencies.
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(mid / std::sqrt(2.0)) > tail ? lo : hi) = mid;
    }
    const double zq = 0.5 * (lo + hi);
    const double c = point();
    s.ci = {c - zq * s.se, c + zq * s.se};
  }
  return s;
}

void check_options(const BootstrapOptions& options) {
  if (options.replicates < 2) fail(ErrorKind::invalid_argument, "bootstrap needs at least 2 replicates");
  if (!(options.level > 0.0 && options.level < 1.0)) fail(ErrorKind::invalid_argument, "CI level must lie in (0,1)");
}

}  // namespace

BootstrapSummary bootstrap(const TableEstimator& estimator, const ObservationTable& table,
                           const BootstrapOptions& options) {
  check_options(options);
  std::vector<std::optional<double>> draws(static_cast<std::size_t>(options.replicates));
  parallel_for(draws.size(), options.threads, [&](std::size_t b) {
    try {
      const auto rows = resample_rows(table.n(), options.seed, b);
      const double v = estimator(select_rows(table, rows));
      if (std::isfinite(v)) draws[b] = v;
    } catch (const Error&) {
    }
  });
  return summarize(draws, options, [&] { return estimator(table); }, "estimator");
}

std::vector<BootstrapSummary> bootstrap(std::span<const EstimatorId> ids, const ObservationTable& table,
                                        const PipelineSpec& pipeline, const BootstrapOptions& options) {
  check_options(options);
  const std::size_t k = ids.size();
  std::vector<std::vector<std::optional<double>>> draws(k, std::vector<std::optional<double>>(
                                                               static_cast<std::size_t>(options.replicates)));
  parallel_for(static_cast<std::size_t>(options.replicates), options.threads, [&](std::size_t b) {
    std::optional<ObservationTable> sample;
    try {
      sample = select_rows(table, resample_rows(table.n(), options.seed, b));
    } catch (const Error&) {
      return;
    }
    // Estimators are refit one at a time so that a failure in one does not discard the others.
    for (std::size_t j = 0; j < k; ++j) {
      try {
        const double v = estimate(*sample, pipeline, ids[j]).point;
        if (std::isfinite(v)) draws[j][b] = v;
      } catch (const Error&) {
      }
    }
  });
  std::vector<BootstrapSummary> out;
  for (std::size_t j = 0; j < k; ++j) {
    out.push_back(summarize(draws[j], options, [&] { return estimate(table, pipeline, ids[j]).point; },
                            to_string(ids[j])));
  }
  return out;
}

}  // namespace ivate

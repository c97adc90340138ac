#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ivate::riesz {

using Row = std::span<const double>;
using ZxFn = std::function<double(double, Row)>;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class LawKind { categorical, continuous };

// A known conditional law of Z given X = x. Continuous laws integrate over
// `support(x)`; unbounded laws are truncated there (Gaussian: mean +/- 8 sd).
struct ConditionalLaw {
  LawKind kind = LawKind::continuous;
  int levels = 0;
  ZxFn density;       // p(z|x), a pmf for categorical laws
  ZxFn cdf;           // F(z|x)
  ZxFn dlog_density;  // d log p(z|x) / dz; may be empty
  std::function<Interval(Row)> support;
};

ConditionalLaw gaussian_law(std::function<double(Row)> mean, double sd, double truncation = 8.0);
ConditionalLaw gaussian_law(double mean, double sd, double truncation = 8.0);
ConditionalLaw uniform_law(double lo, double hi);
ConditionalLaw categorical_law(std::function<double(int, Row)> pmf, int levels);

struct RepresenterFn {
  ZxFn evaluate;
  LawKind kind = LawKind::continuous;
  bool numeric_derivative = false;  // built with the central-difference fallback

  double operator()(double z, Row x) const { return evaluate(z, x); }
};

struct WeightFn {
  ZxFn evaluate;
  ZxFn derivative;  // d omega / dz; empty selects the central-difference fallback

  double operator()(double z, Row x) const { return evaluate(z, x); }
};

// omega_{jk}(x) for 0 <= k < j < K.
using PairWeights = std::function<double(int j, int k, Row x)>;

// Central difference with h = cbrt(eps) * max(1, |z|).
double central_difference(const ZxFn& f, double z, Row x);

// E[f(Z) | X = x] by adaptive Gauss-Kronrod quadrature (continuous) or by
// summation over levels (categorical). `breakpoints` split the integration
// range at known discontinuities. Throws ErrorKind::quadrature when the
// absolute error estimate exceeds 1e-8.
double expectation(const std::function<double(double)>& f, const ConditionalLaw& law, Row x,
                   std::span<const double> breakpoints = {});

// Integral of f over [a, b] with the same error contract.
double integrate(const std::function<double(double)>& f, double a, double b);

// gamma(z,x) = [sum_{k<z} omega_{zk}(x) - sum_{k>z} omega_{kz}(x)] / p(z|x).
RepresenterFn rr_categorical(PairWeights weights, const ConditionalLaw& law);

// gamma(z,x) = -d omega/dz - omega * d log p(z|x)/dz. The boundary condition
// omega * p -> 0 is checked at the support ends for each row in `check_rows`
// (a single empty row when none are given).
RepresenterFn rr_continuous(const WeightFn& weight, const ConditionalLaw& law,
                            const std::vector<std::vector<double>>& check_rows = {});

// omega(z,x) = -F(z|x) E[gamma | Z <= z, X = x] / p(z|x). The representer must
// be conditionally mean-zero (checked to 1e-6 on `check_rows`).
WeightFn weight_from_rr(const RepresenterFn& gamma, const ConditionalLaw& law,
                        const std::vector<std::vector<double>>& check_rows = {});

// Representer of dichotomization at z0:
// {1(z >= z0) - (1 - F(z0|x))} / {F(z0|x)(1 - F(z0|x))}.
RepresenterFn rr_dichotomized(double z0, const ConditionalLaw& law);

// |E[gamma mu | X=x] - E[omega mu' | X=x]|.
double verify_representation(const RepresenterFn& gamma, const WeightFn& weight,
                             const std::function<double(double)>& mu,
                             const std::function<double(double)>& mu_dot, const ConditionalLaw& law, Row x);

// Categorical analogue: |E[gamma mu | X=x] - sum_{k<j} omega_jk(x){mu(j) - mu(k)}|.
double verify_representation_categorical(const RepresenterFn& gamma, const PairWeights& weights,
                                         const std::function<double(int)>& mu, const ConditionalLaw& law, Row x);

// ---------------------------------------------------------------------------
// Self-check suite behind the `riesz-check` command.

struct CheckResult {
  std::string id;
  std::string description;
  double residual = 0.0;
  bool pass = false;
};

const std::vector<std::string>& self_check_ids();
bool is_self_check(const std::string& id);
// Unknown ids throw ErrorKind::invalid_argument.
std::vector<CheckResult> run_self_checks(const std::vector<std::string>& ids, double tolerance);

}  // namespace ivate::riesz

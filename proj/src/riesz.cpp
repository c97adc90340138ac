#include "ivate/riesz.hpp"

#include "ivate/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ivate::riesz {

namespace {

constexpr double kAbsTolerance = 1e-8;
constexpr double kMeanZeroTolerance = 1e-6;
constexpr double kBoundaryTolerance = 1e-8;

const std::vector<std::vector<double>> kDefaultRows = {{}};

const std::vector<std::vector<double>>& rows_or_default(const std::vector<std::vector<double>>& rows) {
  return rows.empty() ? kDefaultRows : rows;
}

double normal_pdf(double z, double mean, double sd) {
  const double u = (z - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double z, double mean, double sd) {
  return 0.5 * std::erfc(-(z - mean) / (sd * std::numbers::sqrt2));
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (!(a < b)) return 0.0;
  double error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 20, 1e-13, &error);
  if (!std::isfinite(value) || error > kAbsTolerance) {
    fail(ErrorKind::quadrature, "quadrature did not converge on [" + std::to_string(a) + ", " +
                                    std::to_string(b) + "] (error estimate " + std::to_string(error) + ")");
  }
  return value;
}

double central_difference(const ZxFn& f, double z, Row x) {
  const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(z));
  return (f(z + h, x) - f(z - h, x)) / (2.0 * h);
}

ConditionalLaw gaussian_law(std::function<double(Row)> mean, double sd, double truncation) {
  if (!(sd > 0.0)) fail(ErrorKind::invalid_argument, "gaussian law needs sd > 0");
  ConditionalLaw law;
  law.kind = LawKind::continuous;
  law.density = [mean, sd](double z, Row x) { return normal_pdf(z, mean(x), sd); };
  law.cdf = [mean, sd](double z, Row x) { return normal_cdf(z, mean(x), sd); };
  law.dlog_density = [mean, sd](double z, Row x) { return -(z - mean(x)) / (sd * sd); };
  law.support = [mean, sd, truncation](Row x) {
    const double m = mean(x);
    return Interval{m - truncation * sd, m + truncation * sd};
  };
  return law;
}

ConditionalLaw gaussian_law(double mean, double sd, double truncation) {
  return gaussian_law([mean](Row) { return mean; }, sd, truncation);
}

ConditionalLaw uniform_law(double lo, double hi) {
  if (!(lo < hi)) fail(ErrorKind::invalid_argument, "uniform law needs lo < hi");
  ConditionalLaw law;
  law.kind = LawKind::continuous;
  const double height = 1.0 / (hi - lo);
  law.density = [=](double z, Row) { return (z >= lo && z <= hi) ? height : 0.0; };
  law.cdf = [=](double z, Row) { return std::clamp((z - lo) * height, 0.0, 1.0); };
  law.dlog_density = [](double, Row) { return 0.0; };
  law.support = [=](Row) { return Interval{lo, hi}; };
  return law;
}

ConditionalLaw categorical_law(std::function<double(int, Row)> pmf, int levels) {
  if (levels < 2) fail(ErrorKind::invalid_argument, "categorical law needs at least 2 levels");
  ConditionalLaw law;
  law.kind = LawKind::categorical;
  law.levels = levels;
  law.density = [pmf](double z, Row x) { return pmf(static_cast<int>(z), x); };
  law.cdf = [pmf, levels](double z, Row x) {
    double total = 0.0;
    for (int k = 0; k < levels && k <= z; ++k) total += pmf(k, x);
    return total;
  };
  law.support = [levels](Row) { return Interval{0.0, static_cast<double>(levels - 1)}; };
  return law;
}

double expectation(const std::function<double(double)>& f, const ConditionalLaw& law, Row x,
                   std::span<const double> breakpoints) {
  if (law.kind == LawKind::categorical) {
    double total = 0.0;
    for (int k = 0; k < law.levels; ++k) {
      const double zk = static_cast<double>(k);
      total += f(zk) * law.density(zk, x);
    }
    return total;
  }
  const Interval s = law.support(x);
  std::vector<double> cuts{s.lo};
  for (double b : breakpoints) {
    if (b > s.lo && b < s.hi) cuts.push_back(b);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(s.hi);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += integrate([&](double z) { return f(z) * law.density(z, x); }, cuts[i], cuts[i + 1]);
  }
  return total;
}

RepresenterFn rr_categorical(PairWeights weights, const ConditionalLaw& law) {
  if (law.kind != LawKind::categorical) fail(ErrorKind::invalid_argument, "rr_categorical needs a categorical law");
  const int levels = law.levels;
  auto pmf = law.density;
  RepresenterFn rr;
  rr.kind = LawKind::categorical;
  rr.evaluate = [weights = std::move(weights), pmf, levels](double zv, Row x) {
    const int z = static_cast<int>(zv);
    if (z < 0 || z >= levels || zv != z) fail(ErrorKind::invalid_argument, "level outside the categorical support");
    const double p = pmf(zv, x);
    if (!(p > 0.0)) fail(ErrorKind::invalid_argument, "pmf is not positive at level " + std::to_string(z));
    double numerator = 0.0;
    for (int k = 0; k < z; ++k) numerator += weights(z, k, x);
    for (int k = z + 1; k < levels; ++k) numerator -= weights(k, z, x);
    return numerator / p;
  };
  return rr;
}

RepresenterFn rr_continuous(const WeightFn& weight, const ConditionalLaw& law,
                            const std::vector<std::vector<double>>& check_rows) {
  if (law.kind != LawKind::continuous) fail(ErrorKind::invalid_argument, "rr_continuous needs a continuous law");
  for (const auto& row : rows_or_default(check_rows)) {
    const Interval s = law.support(row);
    for (double end : {s.lo, s.hi}) {
      const double boundary = weight(end, row) * law.density(end, row);
      if (!(std::abs(boundary) <= kBoundaryTolerance)) {
        fail(ErrorKind::invalid_argument, "boundary condition violated: omega*p = " + std::to_string(boundary) +
                                              " at z = " + std::to_string(end));
      }
    }
  }
  RepresenterFn rr;
  rr.kind = LawKind::continuous;
  rr.numeric_derivative = !weight.derivative || !law.dlog_density;
  ZxFn omega = weight.evaluate;
  ZxFn domega = weight.derivative ? weight.derivative : ZxFn([omega](double z, Row x) {
    return central_difference(omega, z, x);
  });
  ZxFn dlogp = law.dlog_density;
  if (!dlogp) {
    ZxFn density = law.density;
    dlogp = [density](double z, Row x) {
      return central_difference([density](double t, Row r) { return std::log(density(t, r)); }, z, x);
    };
  }
  rr.evaluate = [omega, domega, dlogp](double z, Row x) { return -domega(z, x) - omega(z, x) * dlogp(z, x); };
  return rr;
}

WeightFn weight_from_rr(const RepresenterFn& gamma, const ConditionalLaw& law,
                        const std::vector<std::vector<double>>& check_rows) {
  if (law.kind != LawKind::continuous) fail(ErrorKind::invalid_argument, "weight_from_rr needs a continuous law");
  for (const auto& row : rows_or_default(check_rows)) {
    const double mean = expectation([&](double z) { return gamma(z, row); }, law, row);
    if (!(std::abs(mean) <= kMeanZeroTolerance)) {
      fail(ErrorKind::invalid_argument, "representer not conditionally mean-zero (E[gamma|x] = " +
                                            std::to_string(mean) + ")");
    }
  }
  WeightFn w;
  w.evaluate = [gamma, law](double z, Row x) {
    const Interval s = law.support(x);
    if (z <= s.lo || z >= s.hi) return 0.0;
    const double p = law.density(z, x);
    if (!(p > 0.0)) fail(ErrorKind::invalid_argument, "density vanishes in the interior at z = " + std::to_string(z));
    auto integrand = [&](double t) { return gamma(t, x) * law.density(t, x); };
    // F(z) E[gamma | Z <= z] equals minus the upper-tail integral because
    // gamma is conditionally mean-zero; integrate over the shorter tail.
    if (law.cdf(z, x) <= 0.5) return -integrate(integrand, s.lo, z) / p;
    return integrate(integrand, z, s.hi) / p;
  };
  return w;
}

RepresenterFn rr_dichotomized(double z0, const ConditionalLaw& law) {
  auto cdf = law.cdf;
  RepresenterFn rr;
  rr.kind = law.kind;
  rr.evaluate = [z0, cdf](double z, Row x) {
    // Pr(Z >= z0 | x) for a continuous law; categorical laws use the level below z0.
    const double below = cdf(std::nextafter(z0, -std::numeric_limits<double>::infinity()), x);
    const double upper = 1.0 - below;
    if (!(below > 0.0 && upper > 0.0)) fail(ErrorKind::invalid_argument, "dichotomization threshold outside the support");
    return ((z >= z0 ? 1.0 : 0.0) - upper) / (below * upper);
  };
  return rr;
}

double verify_representation(const RepresenterFn& gamma, const WeightFn& weight,
                             const std::function<double(double)>& mu,
                             const std::function<double(double)>& mu_dot, const ConditionalLaw& law, Row x) {
  const double lhs = expectation([&](double z) { return gamma(z, x) * mu(z); }, law, x);
  const double rhs = expectation([&](double z) { return weight(z, x) * mu_dot(z); }, law, x);
  return std::abs(lhs - rhs);
}

double verify_representation_categorical(const RepresenterFn& gamma, const PairWeights& weights,
                                         const std::function<double(int)>& mu, const ConditionalLaw& law, Row x) {
  const double lhs = expectation([&](double z) { return gamma(z, x) * mu(static_cast<int>(z)); }, law, x);
  double rhs = 0.0;
  for (int j = 1; j < law.levels; ++j) {
    for (int k = 0; k < j; ++k) rhs += weights(j, k, x) * (mu(j) - mu(k));
  }
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------

namespace {

struct CaseDef {
  std::string id;
  std::string description;
  std::function<double()> residual;
};

double max_abs_on_grid(double lo, double hi, int points, const std::function<double(double)>& err) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double z = lo + (hi - lo) * (i + 0.5) / points;
    worst = std::max(worst, std::abs(err(z)));
  }
  return worst;
}

const std::vector<CaseDef>& cases() {
  static const std::vector<CaseDef> defs = [] {
    std::vector<CaseDef> c;
    const Row none;
    c.push_back({"stein_cubic", "N(0,1), gamma=z, omega=1, mu=z^3: E[Z^4] vs E[3Z^2]", [none] {
                   const auto law = gaussian_law(0.0, 1.0);
                   RepresenterFn g{[](double z, Row) { return z; }};
                   WeightFn w{[](double, Row) { return 1.0; }, [](double, Row) { return 0.0; }};
                   return verify_representation(g, w, [](double z) { return z * z * z; },
                                                [](double z) { return 3 * z * z; }, law, none);
                 }});
    c.push_back({"stein_quadratic", "N(0,1), gamma=z, omega=1, mu=z^2: both sides zero", [none] {
                   const auto law = gaussian_law(0.0, 1.0);
                   RepresenterFn g{[](double z, Row) { return z; }};
                   WeightFn w{[](double, Row) { return 1.0; }, [](double, Row) { return 0.0; }};
                   return verify_representation(g, w, [](double z) { return z * z; },
                                                [](double z) { return 2 * z; }, law, none);
                 }});
    c.push_back({"stein_weight", "N(0,1), weight recovered from gamma=z equals 1 on [-4,4]", [none] {
                   const auto law = gaussian_law(0.0, 1.0);
                   const auto w = weight_from_rr(RepresenterFn{[](double z, Row) { return z; }}, law);
                   return max_abs_on_grid(-4, 4, 41, [&](double z) { return w(z, none) - 1.0; });
                 }});
    c.push_back({"gaussian_location_scale", "N(1.5,4), gamma=(z-mu)/sigma^2 recovers omega=1", [none] {
                   const double mu = 1.5;
                   const double sd = 2.0;
                   const auto law = gaussian_law(mu, sd);
                   const auto w =
                       weight_from_rr(RepresenterFn{[=](double z, Row) { return (z - mu) / (sd * sd); }}, law);
                   return max_abs_on_grid(mu - 4 * sd, mu + 4 * sd, 41, [&](double z) { return w(z, none) - 1.0; });
                 }});
    c.push_back({"uniform_rr", "Unif(-1,1), omega=1-z^2 gives gamma=2z", [none] {
                   const auto law = uniform_law(-1.0, 1.0);
                   WeightFn w{[](double z, Row) { return 1 - z * z; }, [](double z, Row) { return -2 * z; }};
                   const auto g = rr_continuous(w, law);
                   return max_abs_on_grid(-1, 1, 41, [&](double z) { return g(z, none) - 2 * z; });
                 }});
    c.push_back({"uniform_weight", "Unif(0,1), gamma=z-1/2 recovers omega=z(1-z)/2", [none] {
                   const auto law = uniform_law(0.0, 1.0);
                   const auto w = weight_from_rr(RepresenterFn{[](double z, Row) { return z - 0.5; }}, law);
                   return max_abs_on_grid(0, 1, 41, [&](double z) { return w(z, none) - z * (1 - z) / 2; });
                 }});
    c.push_back({"uniform_representation", "Unif(0,1), gamma=z-1/2, omega=z(1-z)/2, mu=z^2: both 1/12", [none] {
                   const auto law = uniform_law(0.0, 1.0);
                   RepresenterFn g{[](double z, Row) { return z - 0.5; }};
                   WeightFn w{[](double z, Row) { return z * (1 - z) / 2; }, nullptr};
                   return verify_representation(g, w, [](double z) { return z * z; }, [](double z) { return 2 * z; },
                                                law, none);
                 }});
    c.push_back({"round_trip_gaussian", "N(mu(x),1): gamma -> omega -> gamma on the interior grid", [] {
                   const std::vector<double> x = {1.0, 0.3};
                   const auto law = gaussian_law([](Row r) { return 0.2 + 0.7 * r[1]; }, 1.0);
                   const Row row(x);
                   RepresenterFn g{[](double z, Row r) { return z - (0.2 + 0.7 * r[1]); }};
                   const auto w = weight_from_rr(g, law, {x});
                   const auto back = rr_continuous(w, law, {x});
                   const double m = 0.2 + 0.7 * x[1];
                   return max_abs_on_grid(m - 4, m + 4, 33, [&](double z) { return back(z, row) - g(z, row); });
                 }});
    c.push_back({"round_trip_uniform", "Unif(0,1), gamma=t^3+0.3t with t=z-1/2: gamma -> omega -> gamma", [none] {
                   const auto law = uniform_law(0.0, 1.0);
                   // Odd in (z - 1/2), so conditionally mean-zero.
                   RepresenterFn g{[](double z, Row) {
                     const double t = z - 0.5;
                     return t * t * t + 0.3 * t;
                   }};
                   const auto w = weight_from_rr(g, law);
                   const auto back = rr_continuous(w, law);
                   return max_abs_on_grid(0.05, 0.95, 33, [&](double z) { return back(z, none) - g(z, none); });
                 }});
    c.push_back({"weight_normalization", "Unif(0,1), gamma=z-1/2: E[omega] = E[Z gamma]", [none] {
                   const auto law = uniform_law(0.0, 1.0);
                   RepresenterFn g{[](double z, Row) { return z - 0.5; }};
                   const auto w = weight_from_rr(g, law);
                   const double ew = expectation([&](double z) { return w(z, none); }, law, none);
                   const double ezg = expectation([&](double z) { return z * g(z, none); }, law, none);
                   return std::abs(ew - ezg);
                 }});
    c.push_back({"dichotomized_mean_zero", "N(0,1) dichotomized at 0.3: E[gamma|x] = 0", [none] {
                   const auto law = gaussian_law(0.0, 1.0);
                   const auto g = rr_dichotomized(0.3, law);
                   const double breaks[] = {0.3};
                   return std::abs(expectation([&](double z) { return g(z, none); }, law, none, breaks));
                 }});
    c.push_back({"categorical_k3", "K=3 uniform pmf, omega21=omega10=1: WATE representation", [none] {
                   const auto law = categorical_law([](int, Row) { return 1.0 / 3.0; }, 3);
                   PairWeights w = [](int j, int k, Row) { return (j - k == 1) ? 1.0 : 0.0; };
                   const auto g = rr_categorical(w, law);
                   return verify_representation_categorical(g, w, [](int k) { return 0.2 + 0.1 * k * k; }, law, none);
                 }});
    return c;
  }();
  return defs;
}

}  // namespace

const std::vector<std::string>& self_check_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& c : cases()) out.push_back(c.id);
    return out;
  }();
  return ids;
}

bool is_self_check(const std::string& id) {
  const auto& ids = self_check_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::vector<CheckResult> run_self_checks(const std::vector<std::string>& ids, double tolerance) {
  const auto& all = cases();
  std::vector<CheckResult> out;
  const std::vector<std::string>& wanted = ids.empty() ? self_check_ids() : ids;
  for (const auto& id : wanted) {
    auto it = std::find_if(all.begin(), all.end(), [&](const CaseDef& c) { return c.id == id; });
    if (it == all.end()) fail(ErrorKind::invalid_argument, "unknown riesz check case '" + id + "'");
    CheckResult r{it->id, it->description, it->residual(), false};
    r.pass = r.residual <= tolerance;
    out.push_back(r);
  }
  return out;
}

}  // namespace ivate::riesz

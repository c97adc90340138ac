#include "doctest.h"

#include "ivate/error.hpp"
#include "ivate/riesz.hpp"
#include "ivate/solve.hpp"

#include <cmath>

using namespace ivate;
using namespace ivate::riesz;

namespace {
const std::vector<double> kNoX;
const Row kNone(kNoX);
}  // namespace

TEST_SUITE("riesz") {
  TEST_CASE("binary instrument representer") {
    // p(1) = 0.3, omega_10 = 2: gamma(1) = 2/0.3, gamma(0) = -2/0.7
    const auto law = categorical_law([](int k, Row) { return k == 1 ? 0.3 : 0.7; }, 2);
    PairWeights w = [](int, int, Row) { return 2.0; };
    const auto g = rr_categorical(w, law);
    CHECK(g(1.0, kNone) == doctest::Approx(2.0 / 0.3));
    CHECK(g(0.0, kNone) == doctest::Approx(-2.0 / 0.7));
    const double lhs = 0.3 * g(1.0, kNone) * 5.0 + 0.7 * g(0.0, kNone) * 1.5;
    CHECK(lhs == doctest::Approx(2.0 * (5.0 - 1.5)));
    CHECK(verify_representation_categorical(g, w, [](int k) { return k ? 5.0 : 1.5; }, law, kNone) < 1e-12);
  }

  TEST_CASE("three-level instrument") {
    const auto law = categorical_law([](int k, Row) { return std::array{0.2, 0.5, 0.3}[k]; }, 3);
    PairWeights w = [](int j, int k, Row) { return 1.0 + j + 0.5 * k; };
    const auto g = rr_categorical(w, law);
    // gamma(1) = [omega_10 - omega_21] / 0.5 = (2 - 3.5) / 0.5
    CHECK(g(1.0, kNone) == doctest::Approx(-3.0));
    double mean = 0.0;
    for (int k = 0; k < 3; ++k) mean += law.density(k, kNone) * g(k, kNone);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(verify_representation_categorical(g, w, [](int k) { return std::sin(k + 0.3); }, law, kNone) < 1e-12);
  }

  TEST_CASE("gaussian stein identity") {
    const auto law = gaussian_law(0.0, 1.0);
    WeightFn one{[](double, Row) { return 1.0; }, [](double, Row) { return 0.0; }};
    const auto g = rr_continuous(one, law);
    for (double z : {-1.5, 0.0, 0.7, 2.0}) CHECK(g(z, kNone) == doctest::Approx(z).epsilon(1e-12));
    const double r = verify_representation(
        g, one, [](double z) { return z * z * z; }, [](double z) { return 3 * z * z; }, law, kNone);
    CHECK(r <= 1e-6);
  }

  TEST_CASE("uniform law weight recovery") {
    const auto law = uniform_law(0.0, 1.0);
    RepresenterFn g{[](double z, Row) { return z - 0.5; }, LawKind::continuous, false};
    const auto w = weight_from_rr(g, law);
    for (double z : {0.1, 0.4, 0.9}) CHECK(w(z, kNone) == doctest::Approx(z * (1 - z) / 2).epsilon(1e-8));
  }

  TEST_CASE("dichotomization representer is mean zero") {
    const auto law = gaussian_law(0.0, 1.0);
    const auto g = rr_dichotomized(0.3, law);
    const std::array<double, 1> cut{0.3};
    const double m = expectation([&](double z) { return g(z, kNone); }, law, kNone, cut);
    CHECK(std::abs(m) < 1e-8);
  }

  TEST_CASE("self checks all pass at the default tolerance") {
    for (const auto& r : run_self_checks({}, 1e-5)) {
      INFO(r.id);
      CHECK(r.pass);
    }
    CHECK_THROWS_AS(run_self_checks({"nope"}, 1e-5), Error);
  }
}

TEST_SUITE("solve") {
  TEST_CASE("affine system converges in one step") {
    Matrix a(2, 2);
    a << 3, 1, 1, 2;
    Vector b(2);
    b << 1, -1;
    EstimatingEquation eq;
    eq.dimension = 2;
    eq.contributions = [=](const Vector& t) { return Matrix((b - a * t).transpose()); };
    const auto rep = solve(eq, Vector::Zero(2));
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    const Vector ref = a.partialPivLu().solve(b);
    CHECK((rep.solution - ref).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("scalar tanh equation") {
    EstimatingEquation eq;
    eq.dimension = 1;
    eq.contributions = [](const Vector& t) { return Matrix::Constant(1, 1, 0.5 - std::tanh(t[0])); };
    const auto rep = solve(eq, Vector::Zero(1));
    CHECK(rep.converged);
    CHECK(rep.solution[0] == doctest::Approx(std::atanh(0.5)).epsilon(1e-12));
  }

  TEST_CASE("no root: minimizer policy") {
    EstimatingEquation eq;
    eq.dimension = 1;
    eq.contributions = [](const Vector& t) { return Matrix::Constant(1, 1, 1.5 - std::tanh(t[0])); };
    try {
      solve(eq, Vector::Zero(1));
      FAIL("expected non_convergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::non_convergence);
    }
    SolveOptions opt;
    opt.accept_minimizer = true;
    const auto rep = solve(eq, Vector::Zero(1), opt);
    CHECK_FALSE(rep.converged);
    CHECK(rep.used_fallback);
    CHECK(rep.solution[0] > 3.0);
    CHECK(rep.residual_norm < 0.51);
  }

  TEST_CASE("finite-difference jacobian") {
    EstimatingEquation eq;
    eq.dimension = 2;
    eq.contributions = [](const Vector& t) {
      Matrix m(1, 2);
      m << std::sin(t[0]) * t[1], t[0] * t[0];
      return m;
    };
    Vector at(2);
    at << 0.3, 2.0;
    const Matrix j = finite_difference_jacobian(eq, at);
    CHECK(j(0, 0) == doctest::Approx(std::cos(0.3) * 2.0).epsilon(1e-8));
    CHECK(j(0, 1) == doctest::Approx(std::sin(0.3)).epsilon(1e-8));
    CHECK(j(1, 0) == doctest::Approx(0.6).epsilon(1e-8));
    CHECK(std::abs(j(1, 1)) < 1e-10);
  }
}

#include "doctest.h"
#include "../oracles.hpp"

#include "ivate/error.hpp"
#include "ivate/glm.hpp"
#include "ivate/rng.hpp"

#include <cmath>

using namespace ivate;

TEST_SUITE("glm") {
  TEST_CASE("intercept-only logistic recovers logit of the mean") {
    Matrix x = Matrix::Ones(8, 1);
    Vector y = Vector::Zero(8);
    y[0] = 1.0;
    y[5] = 1.0;
    const auto fit = glm::fit_logistic(x, y);
    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-10));
    CHECK(fit.coefficients[0] == doctest::Approx(-1.0986).epsilon(1e-4));
  }

  TEST_CASE("constant response is separation") {
    Matrix x = Matrix::Ones(6, 1);
    Vector y = Vector::Zero(6);
    CHECK_THROWS_AS(glm::fit_logistic(x, y), Error);
    try {
      glm::fit_logistic(x, y);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::separation);
    }
  }

  TEST_CASE("logistic matches gradient-ascent oracle") {
    Philox rng(11, 0);
    const int n = 200;
    Matrix x(n, 2);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = rng.normal();
      y[i] = rng.bernoulli(expit(0.5 - x(i, 1))) ? 1.0 : 0.0;
    }
    const auto fit = glm::fit_logistic(x, y);
    const auto ref = oracle::logistic_gradient_ascent(oracle::rows_of(x), oracle::vec_of(y));
    CHECK(fit.coefficients[0] == doctest::Approx(ref[0]).epsilon(1e-7));
    CHECK(fit.coefficients[1] == doctest::Approx(ref[1]).epsilon(1e-7));
  }

  TEST_CASE("least squares") {
    Matrix x(4, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3;
    Vector y(4);
    y << 1, 3, 5, 7;
    const auto fit = glm::fit_linear(x, y);
    CHECK(fit.coefficients[0] == doctest::Approx(1.0));
    CHECK(fit.coefficients[1] == doctest::Approx(2.0));

    const auto t = fixture::continuous_table(60, 2);
    const auto lin = glm::fit_linear(t.x(), t.y());
    oracle::Mat phi = oracle::rows_of(t.x());
    const auto ref = oracle::weighted_moment_solve(phi, phi, oracle::Vec(60, 1.0), oracle::vec_of(t.y()));
    for (int k = 0; k < 3; ++k) CHECK(lin.coefficients[k] == doctest::Approx(ref[k]).epsilon(1e-10));
  }

  TEST_CASE("rank deficiency") {
    Matrix x(4, 2);
    x << 1, 2, 1, 2, 1, 2, 1, 2;
    Vector y = Vector::LinSpaced(4, 0, 1);
    CHECK(glm::numerical_rank(x) == 1);
    try {
      glm::fit_linear(x, y);
      FAIL("expected rank_deficient");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::rank_deficient);
    }
  }
}

TEST_SUITE("rng") {
  TEST_CASE("philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(Philox::block({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("streams are reproducible and distinct") {
    Philox a(7, 3), b(7, 3), c(7, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto va = a.next_u64();
      CHECK(va == b.next_u64());
      differs = differs || va != c.next_u64();
    }
    CHECK(differs);
  }

  TEST_CASE("uniform and normal moments") {
    Philox r(1, 0);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double g = r.normal();
      sn += g;
      sn2 += g * g;
    }
    CHECK(std::abs(su / n - 0.5) < 0.005);
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(std::abs(sn2 / n - 1.0) < 0.015);
  }

  TEST_CASE("below stays in range") {
    Philox r(2, 0);
    for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7u);
  }
}

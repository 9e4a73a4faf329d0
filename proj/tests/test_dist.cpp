#include "doctest.h"

#include "medzim/dist.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

using namespace medzim;

namespace {

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST_CASE("expit and logit") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(logit(0.3)) == doctest::Approx(0.3).epsilon(1e-15));
  // Reference from 40-digit arithmetic.
  CHECK(rel_err(expit(-6.2), 0.0020253203890498817778) < 1e-14);
  CHECK(expit(800.0) == 1.0);
  CHECK(expit(-800.0) >= 0.0);
  for (double p : {1e-8, 1e-5, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-8}) {
    CHECK(std::abs(expit(logit(p)) - p) <= 1e-12);
  }
}

TEST_CASE("log_gamma matches high-precision references") {
  struct Case {
    double x;
    double want;
  };
  const Case cases[] = {{0.5, 0.57236494292470008707},   {1e-3, 6.9071788853838536617},
                        {7.3, 7.1478925230222486921},    {150.2, 601.01106392589216349},
                        {1e-10, 23.025850929882735237},  {3.5e6, 49238950.727410541134},
                        {10.0, 12.801827480081469611},   {9.999, 12.799575780077413715}};
  for (const auto& c : cases) {
    CAPTURE(c.x);
    CHECK(std::abs(log_gamma(c.x) - c.want) <= 1e-13 * std::max(1.0, std::abs(c.want)));
  }
}

TEST_CASE("log_beta") {
  CHECK(std::abs(log_beta(1.0, 1.0)) < 1e-14);
  CHECK(log_beta(2.0, 3.0) == doctest::Approx(std::log(1.0 / 12.0)).epsilon(1e-14));
  struct Case {
    double a, b, want;
  };
  const Case cases[] = {{0.05, 49.95, 2.7738049775528318973},  {0.0101, 49.9899, 4.5500644014862052839},
                        {2.5, 1e-3, 6.9064754836036883835},    {1e-8, 3.0, 18.420680728952365514},
                        {30.5, 70.25, -62.382343846334847387}, {1e5, 2.5, -28.497649541827653062},
                        {0.7, 0.3, 1.3566652413497420971}};
  for (const auto& c : cases) {
    CAPTURE(c.a);
    CAPTURE(c.b);
    CHECK(rel_err(log_beta(c.a, c.b), c.want) < 1e-13);
    CHECK(log_beta(c.b, c.a) == doctest::Approx(log_beta(c.a, c.b)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(log_beta(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_beta(1.0, -2.0), std::domain_error);
}

TEST_CASE("zib_logpdf") {
  CHECK(zib_logpdf(0.0, {0.25, 0.3, 10.0}) == doctest::Approx(std::log(0.25)));
  CHECK(zib_logpdf(0.5, {0.5, 0.5, 2.0}) == doctest::Approx(std::log(0.5)));
  CHECK(std::isinf(zib_logpdf(0.0, {0.0, 0.3, 10.0})));
  CHECK_THROWS_AS(zib_logpdf(1.0, {0.1, 0.3, 10.0}), std::domain_error);
  CHECK_THROWS_AS(zib_logpdf(-0.1, {0.1, 0.3, 10.0}), std::domain_error);
  CHECK(zib_logpdf(0.2, {1.0, 0.3, 10.0}) == -INFINITY);

  // Point mass plus the Beta part integrates to 1 (midpoint rule in a
  // variable that removes both endpoint singularities).
  const ZibParams p{0.2, 0.3, 3.0};
  const int n = 400000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n;
    // m = (1 - cos(pi t)) / 2 maps (0,1) onto (0,1) with vanishing slope at both ends.
    const double m = 0.5 * (1.0 - std::cos(M_PI * t));
    const double dm = 0.5 * M_PI * std::sin(M_PI * t) / n;
    total += std::exp(zib_logpdf(m, p)) * dm;
  }
  CHECK(total + p.delta == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zib_mean") {
  CHECK(zib_mean({0.0, 0.3, 5.0}) == doctest::Approx(0.3));
  CHECK(zib_mean({1.0 - 1e-12, 0.3, 5.0}) < 1e-11);
  CHECK(rel_err(zib_mean({expit(-1.16), expit(-6.2), 50.0}), 0.0015419426702220460051) < 1e-13);
}

TEST_CASE("zib_sample moments and determinism") {
  Rng rng(42);
  const ZibParams p{0.2, 0.0025, 50.0};
  const auto draws = zib_sample(p, 100000, rng);
  std::size_t zeros = 0;
  double pos_sum = 0.0;
  for (double m : draws) {
    CHECK((m >= 0.0 && m < 1.0));
    if (m == 0.0) ++zeros;
    else pos_sum += m;
  }
  const double zero_frac = static_cast<double>(zeros) / draws.size();
  CHECK(std::abs(zero_frac - 0.2) < 0.01);
  CHECK(std::abs(pos_sum / (draws.size() - zeros) / 0.0025 - 1.0) < 0.1);

  Rng r1(7), r2(7);
  CHECK(zib_sample(p, 50, r1) == zib_sample(p, 50, r2));

  Rng r3(9);
  const auto all_zero = zib_sample({1.0 - 1e-12, 0.5, 2.0}, 1000, r3);
  CHECK(std::count(all_zero.begin(), all_zero.end(), 0.0) == 1000);
}

TEST_CASE("beta_sample stays inside the open interval for tiny shapes") {
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const double v = beta_sample(0.01, 0.02, rng);
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("zero-inflated Dirichlet") {
  DirichletMixtureSpec spec;
  spec.alpha0 = {-3.0, 1.0, 1.5};
  spec.alpha1 = {1.0, 1.5, -1.2};
  spec.phi = 50.0;
  spec.gamma0 = -1.5;
  spec.gamma1 = 1.0;

  const auto mu = spec.means(0.0);
  REQUIRE(mu.size() == 4);
  CHECK(std::accumulate(mu.begin(), mu.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const double denom = 1.0 + std::exp(-3.0) + std::exp(1.0) + std::exp(1.5);
  CHECK(mu[0] == doctest::Approx(std::exp(-3.0) / denom).epsilon(1e-14));
  CHECK(mu[3] == doctest::Approx(1.0 / denom).epsilon(1e-14));

  Rng rng(11);
  const int n = 40000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    const auto c = zid_sample(spec, 0.0, rng);
    REQUIRE(c.size() == 4);
    REQUIRE(std::abs(std::accumulate(c.begin(), c.end(), 0.0) - 1.0) <= 1e-12);
    zeros += c[0] == 0.0 ? 1 : 0;
  }
  const double rate = expit(-1.5);
  const double se = std::sqrt(rate * (1.0 - rate) / n);
  CHECK(std::abs(static_cast<double>(zeros) / n - rate) < 4.0 * se);

  // Very large dispersion concentrates the draws at the means.
  spec.phi = 1e9;
  spec.gamma0 = -50.0;
  const auto c = zid_sample(spec, 1.0, rng);
  const auto m1 = spec.means(1.0);
  for (std::size_t j = 0; j < c.size(); ++j) CHECK(c[j] == doctest::Approx(m1[j]).epsilon(1e-3));
}

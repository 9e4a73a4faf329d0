#include "doctest.h"

#include "medzim/effects.hpp"
#include "medzim/simulate.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace medzim;

namespace {

ModelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModelParams p;
  p.beta0 = 2.0 * u(rng);
  p.beta1 = 20.0 * u(rng);
  p.beta2 = 3.0 * u(rng);
  p.beta3 = 3.0 * u(rng);
  p.beta4 = 3.0 * u(rng);
  p.beta5 = 5.0 * u(rng);
  p.delta_err = 1.0 + 0.5 * u(rng);
  p.alpha0 = -2.0 + 2.0 * u(rng);
  p.alpha1 = u(rng);
  p.phi = std::exp(2.0 + 1.5 * u(rng));
  p.gamma0 = -1.0 + u(rng);
  p.gamma1 = u(rng);
  return p;
}

}  // namespace

TEST_CASE("closed forms at the low relative-abundance truths") {
  const ModelParams p = low_abundance_truth();
  const ExposureContrast c;
  CHECK(std::abs(nie1(p, c) - 0.10) <= 0.005);
  CHECK(std::abs(nie2(p, c) - 0.55) <= 0.005);
  CHECK(nie(p, c) == doctest::Approx(nie1(p, c) + nie2(p, c)).epsilon(1e-15));
  CHECK(nde(p, c) == doctest::Approx(5.0 + 3.0 * (1.0 - expit(-1.16))).epsilon(1e-14));
  CHECK(std::abs(nde(p, c) - 7.284) < 5e-4);

  ExposureContrast at_half = c;
  at_half.m_controlled = 0.5;
  CHECK(cde(p, at_half) == doctest::Approx(8.0));
  at_half.m_controlled = 0.0;
  CHECK(cde(p, at_half) == doctest::Approx(5.0));
  CHECK_THROWS_AS(cde(p, c), std::invalid_argument);
}

TEST_CASE("closed forms at the high relative-abundance truths") {
  const ModelParams p = high_abundance_truth();
  CHECK(std::abs(nie(p, {}) - 9.85) <= 0.01);
  CHECK(std::abs(nie1(p, {}) - 9.30) <= 0.01);
}

TEST_CASE("effects vanish when the pathway is switched off") {
  ModelParams p = low_abundance_truth();
  ModelParams flat = p;
  flat.alpha1 = 0.0;
  flat.gamma1 = 0.0;
  CHECK(nie1(flat, {}) == 0.0);
  CHECK(nie2(flat, {}) == 0.0);

  ModelParams no_presence = p;
  no_presence.beta2 = 0.0;
  no_presence.beta4 = 0.0;
  CHECK(nie2(no_presence, {}) == 0.0);

  ModelParams null = p;
  null.beta1 = null.beta2 = null.beta4 = null.beta5 = 0.0;
  for (auto c : {ExposureContrast{0.0, 1.0, {}}, ExposureContrast{1.0, 0.0, {}}, ExposureContrast{-2.0, 3.0, {}}}) {
    CHECK(nie1(null, c) == 0.0);
    CHECK(nie2(null, c) == 0.0);
  }

  ModelParams plain = p;
  plain.beta4 = 0.0;
  plain.beta5 = 0.0;
  CHECK(nde(plain, {0.0, 2.0, {}}) == doctest::Approx(2.0 * plain.beta3));
  CHECK(nde(plain, {0.0, 1.0, {}}) == doctest::Approx(-nde(plain, {1.0, 0.0, {}})));
  ExposureContrast m_fixed{0.0, 1.0, 0.3};
  CHECK(cde(plain, m_fixed) == doctest::Approx(plain.beta3));
}

TEST_CASE("pinned coefficients are ignored") {
  ModelParams p = low_abundance_truth();
  p.beta5 = 4.0;
  ModelConfig cfg;
  cfg.include_interaction_linear = false;
  ModelParams q = p;
  q.beta5 = 0.0;
  for (Effect e : {Effect::Nie1, Effect::Nie2, Effect::Nie, Effect::Nde}) {
    CHECK(effect_value(e, p, {}, cfg) == effect_value(e, q, {}, cfg));
  }
  ModelConfig plain;
  plain.zero_inflated = false;
  CHECK(nie2(p, {}, plain) == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(123);
  ModelConfig cfg;
  ExposureContrast c{0.0, 1.0, 0.2};
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p = random_params(rng);
    for (Effect e : kAllEffects) {
      const Eigen::VectorXd g = effect_gradient(e, p, c, cfg);
      const auto free = cfg.free_params();
      for (std::size_t j = 0; j < free.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[free[j]]));
        ModelParams up = p, down = p;
        up[free[j]] += h;
        down[free[j]] -= h;
        const double fd = (effect_value(e, up, c, cfg) - effect_value(e, down, c, cfg)) / (2.0 * h);
        CAPTURE(effect_name(e));
        CAPTURE(param_name(free[j]));
        CHECK(std::abs(g(static_cast<Eigen::Index>(j)) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("gradient structure") {
  const ModelParams p = low_abundance_truth();
  const ModelConfig cfg;
  const auto free = cfg.free_params();
  auto index = [&](Param slot) {
    return static_cast<Eigen::Index>(std::find(free.begin(), free.end(), slot) - free.begin());
  };
  const Eigen::VectorXd g2 = effect_gradient(Effect::Nie2, p, {}, cfg);
  CHECK(g2(index(Param::beta3)) == 0.0);
  const Eigen::VectorXd g1 = effect_gradient(Effect::Nie1, p, {}, cfg);
  const double e2 = (1.0 - expit(p.gamma0 + p.gamma1)) * expit(p.alpha0 + p.alpha1);
  const double e1 = (1.0 - expit(p.gamma0)) * expit(p.alpha0);
  CHECK(g1(index(Param::beta1)) == doctest::Approx(e2 - e1).epsilon(1e-14));

  ModelConfig pinned;
  pinned.include_interaction_linear = false;
  CHECK(effect_gradient(Effect::Nie, p, {}, pinned).size() == 11);
}

TEST_CASE("delta method") {
  CHECK(normal_critical_value(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-15));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd ej = Eigen::VectorXd::Zero(3);
  ej(1) = 1.0;
  const auto r = delta_method(2.0, ej, eye);
  CHECK(r.available);
  CHECK(r.se == doctest::Approx(1.0));
  CHECK(r.lo == doctest::Approx(2.0 - 1.959963984540054));
  CHECK(r.p_value == doctest::Approx(std::erfc(2.0 / std::sqrt(2.0))));

  // The CDE is linear in the coefficients, so the delta-method interval is exact.
  ModelParams p = low_abundance_truth();
  ModelConfig cfg;
  ExposureContrast c{0.0, 2.0, 0.4};
  const auto free = cfg.free_params();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(free.size()),
                                              static_cast<Eigen::Index>(free.size()));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd root(cov.rows(), cov.cols());
  for (Eigen::Index i = 0; i < root.size(); ++i) root.data()[i] = z(rng);
  cov = root * root.transpose();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(cov.rows());
  // CDE = (x2 - x1)(b3 + b4 + b5 m) for m > 0.
  for (std::size_t j = 0; j < free.size(); ++j) {
    if (free[j] == Param::beta3 || free[j] == Param::beta4) w(static_cast<Eigen::Index>(j)) = 2.0;
    if (free[j] == Param::beta5) w(static_cast<Eigen::Index>(j)) = 0.8;
  }
  const auto inf = delta_method(cde(p, c), effect_gradient(Effect::Cde, p, c, cfg), cov);
  CHECK(inf.se == doctest::Approx(std::sqrt(w.dot(cov * w))).epsilon(1e-13));

  const Eigen::MatrixXd bad = -eye;
  CHECK_FALSE(delta_method(1.0, ej, bad).available);
}

TEST_CASE("closed forms agree with Monte Carlo of the definitions") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 3; ++trial) {
    const ModelParams p = random_params(rng);
    const double x1 = trial == 2 ? -0.5 : 0.0;
    const double x2 = trial == 2 ? 1.5 : 1.0;
    const auto mc = oracle::mc_effects(p, x1, x2, 200000, 1000 + static_cast<std::uint64_t>(trial));
    const ExposureContrast c{x1, x2, {}};
    CHECK(std::abs(nie1(p, c) - mc.nie1.mean) <= 3.0 * mc.nie1.se);
    CHECK(std::abs(nie2(p, c) - mc.nie2.mean) <= 3.0 * mc.nie2.se);
    CHECK(std::abs(nie(p, c) - mc.nie.mean) <= 3.0 * mc.nie.se);
    CHECK(std::abs(nde(p, c) - mc.nde.mean) <= 3.0 * std::max(mc.nde.se, 1e-12));
    if (p.beta4 == 0.0 && p.beta5 == 0.0) CHECK(std::abs(nie(p, c) + nde(p, c) - mc.total.mean) <= 3.0 * mc.total.se);
  }

  // Total effect identity without interactions.
  ModelParams p = random_params(rng);
  p.beta4 = 0.0;
  p.beta5 = 0.0;
  const auto mc = oracle::mc_effects(p, 0.0, 1.0, 200000, 77);
  CHECK(std::abs(nie(p, {}) + nde(p, {}) - mc.total.mean) <= 3.0 * mc.total.se);
}

TEST_CASE("contrast validation") {
  ExposureContrast c{0.0, 1.0, 1.5};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.m_controlled = std::nan("");
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

#include "medzim/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace medzim {

namespace {

constexpr double kStirlingCutoff = 10.0;
constexpr double kLnSqrt2Pi = 0.91893853320467274178;  // 0.5 ln(2 pi)

// ln Gamma(x) - [(x - 0.5) ln x - x + 0.5 ln(2 pi)] for x >= 10.
double stirling_correction(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number coefficients B_{2k} / (2k (2k - 1)).
  double series = 1.0 / 156.0;
  series = -691.0 / 360360.0 + inv2 * series;
  series = 1.0 / 1188.0 + inv2 * series;
  series = -1.0 / 1680.0 + inv2 * series;
  series = 1.0 / 1260.0 + inv2 * series;
  series = -1.0 / 360.0 + inv2 * series;
  series = 1.0 / 12.0 + inv2 * series;
  return series * inv;
}

}  // namespace

double expit(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("log_gamma: argument must be positive, got " + std::to_string(x));
  }
  if (x >= kStirlingCutoff) {
    return (x - 0.5) * std::log(x) - x + kLnSqrt2Pi + stirling_correction(x);
  }
  // Shift up to the Stirling range: Gamma(x) = Gamma(x + n) / (x (x+1) ... (x+n-1)).
  double shifted = x;
  double product = 1.0;
  while (shifted < kStirlingCutoff) {
    product *= shifted;
    shifted += 1.0;
  }
  return log_gamma(shifted) - std::log(product);
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("log_beta: arguments must be positive");
  }
  const double p = std::min(a, b);
  const double q = std::max(a, b);
  const double ratio = p / (p + q);
  if (p >= kStirlingCutoff) {
    const double corr =
        stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
    return -0.5 * std::log(q) + kLnSqrt2Pi + corr + (p - 0.5) * std::log(ratio) +
           q * std::log1p(-ratio);
  }
  if (q >= kStirlingCutoff) {
    const double corr = stirling_correction(q) - stirling_correction(p + q);
    return log_gamma(p) + corr + p - p * std::log(p + q) + (q - 0.5) * std::log1p(-ratio);
  }
  return log_gamma(p) + log_gamma(q) - log_gamma(p + q);
}

void ZibParams::validate() const {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::domain_error("ZibParams: delta must lie in [0, 1)");
  }
  if (!(mu > 0.0 && mu < 1.0)) {
    throw std::domain_error("ZibParams: mu must lie in (0, 1)");
  }
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw std::domain_error("ZibParams: phi must be positive");
  }
}

double zib_logpdf(double m, const ZibParams& p) {
  if (!(m >= 0.0 && m < 1.0)) {
    throw std::domain_error("zib_logpdf: m must lie in [0, 1), got " + std::to_string(m));
  }
  if (m == 0.0) {
    return std::log(p.delta);
  }
  const double a = p.shape_a();
  const double b = p.shape_b();
  return std::log1p(-p.delta) + (a - 1.0) * std::log(m) + (b - 1.0) * std::log1p(-m) -
         log_beta(a, b);
}

double zib_mean(const ZibParams& p) { return (1.0 - p.delta) * p.mu; }

double beta_sample(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  for (;;) {
    const double u = ga(rng);
    const double v = gb(rng);
    const double m = u / (u + v);
    // Underflow of the Gamma draws can land on the support boundary; redraw.
    if (m > 0.0 && m < 1.0) {
      return m;
    }
  }
}

std::vector<double> zib_sample(const ZibParams& p, std::size_t n, Rng& rng) {
  p.validate();
  std::bernoulli_distribution is_zero(p.delta);
  std::vector<double> out(n);
  for (auto& m : out) {
    m = is_zero(rng) ? 0.0 : beta_sample(p.shape_a(), p.shape_b(), rng);
  }
  return out;
}

std::vector<double> DirichletMixtureSpec::means(double x) const {
  const std::size_t k = alpha0.size();
  std::vector<double> eta(k + 1, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    eta[j] = alpha0[j] + alpha1[j] * x;
  }
  const double top = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (auto& e : eta) {
    e = std::exp(e - top);
    total += e;
  }
  for (auto& e : eta) {
    e /= total;
  }
  return eta;
}

void DirichletMixtureSpec::validate() const {
  if (alpha0.empty() || alpha0.size() != alpha1.size()) {
    throw std::invalid_argument("DirichletMixtureSpec: alpha0/alpha1 must be nonempty and equal length");
  }
  if (!(phi > 0.0)) {
    throw std::invalid_argument("DirichletMixtureSpec: phi must be positive");
  }
}

std::vector<double> zid_sample(const DirichletMixtureSpec& spec, double x, Rng& rng) {
  const std::vector<double> mu = spec.means(x);
  std::vector<double> comp(mu.size());
  double total = 0.0;
  while (!(total > 0.0)) {
    total = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      std::gamma_distribution<double> g(mu[j] * spec.phi, 1.0);
      comp[j] = g(rng);
      total += comp[j];
    }
  }
  for (auto& c : comp) {
    c /= total;
  }

  std::bernoulli_distribution structural_zero(spec.zero_probability(x));
  if (structural_zero(rng)) {
    comp[0] = 0.0;
    double rest = 0.0;
    for (std::size_t j = 1; j < comp.size(); ++j) {
      rest += comp[j];
    }
    for (std::size_t j = 1; j < comp.size(); ++j) {
      comp[j] /= rest;
    }
  }
  return comp;
}

}  // namespace medzim

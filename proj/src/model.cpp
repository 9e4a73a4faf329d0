#include "medzim/model.hpp"

#include "medzim/dist.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace medzim {

namespace {

constexpr double kLnSqrt2Pi = 0.918938533204672741780;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr std::array<double ModelParams::*, kNumParams> kSlots = {
    &ModelParams::beta0,  &ModelParams::beta1,     &ModelParams::beta2,  &ModelParams::beta3,
    &ModelParams::beta4,  &ModelParams::beta5,     &ModelParams::delta_err,
    &ModelParams::alpha0, &ModelParams::alpha1,    &ModelParams::phi,    &ModelParams::gamma0,
    &ModelParams::gamma1,
};

constexpr std::array<std::string_view, kNumParams> kNames = {
    "beta0", "beta1", "beta2", "beta3", "beta4", "beta5",
    "delta", "alpha0", "alpha1", "phi", "gamma0", "gamma1",
};

double log_expit(double t) {
  return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// ln int_0^upper Beta(m; a, b) exp(kernel(m)) dm, where kernel combines an
// optional exponential thinning term and an optional Gaussian outcome
// kernel. Endpoint singularities of the Beta density are removed by the
// substitutions m = v t^(1/a) near 0 and 1 - m = (1 - u) s^(1/b) near 1.
struct BetaWindowMass {
  double a = 1.0;
  double b = 1.0;
  double upper = 1.0;
  double thinning = 0.0;
  bool gaussian = false;
  double centered = 0.0;  // y - (intercept when present)
  double slope = 0.0;
  double scale = 1.0;

  // log kernel(m) - log kernel(ref), written as a difference of squares so
  // that a large common Gaussian term does not cancel.
  double log_kernel_rel(double m, double ref) const {
    const double d = m - ref;
    double v = -thinning * d;
    if (gaussian) {
      const double sum = 2.0 * centered - slope * (m + ref);
      v += slope * d * sum / (2.0 * scale * scale);
    }
    return v;
  }

  double log_kernel_at(double m) const {
    double v = -thinning * m;
    if (gaussian) {
      const double r = centered - slope * m;
      v -= r * r / (2.0 * scale * scale);
    }
    return v;
  }

  // Maximizer of the (concave) log kernel over [0, upper].
  double peak() const {
    if (!gaussian || slope == 0.0) {
      return 0.0;
    }
    const double m = (centered - thinning * scale * scale / slope) / slope;
    return std::clamp(m, 0.0, upper);
  }

  double log_mass(const QuadratureSpec& quad) const {
    if (!(upper > 0.0)) {
      return kNegInf;
    }
    const double mode = peak();

    std::vector<double> cuts = {0.0, upper};
    if (upper == 1.0) {
      cuts.push_back(0.5);
    }
    if (gaussian && slope != 0.0) {
      const double width = scale / std::abs(slope);
      if (width < 0.25 * upper) {
        for (double c : {mode - 5.0 * width, mode, mode + 5.0 * width}) {
          if (c > 0.0 && c < upper) cuts.push_back(c);
        }
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    double total = kNegInf;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double u = cuts[i];
      const double v = cuts[i + 1];
      if (!(v > u)) continue;
      double log_prefactor = 0.0;
      double value = 0.0;
      if (u == 0.0) {
        const double k = a < 1.0 ? 1.0 / a : 1.0;
        const double power = a < 1.0 ? 0.0 : a - 1.0;
        auto f = [&](double t) {
          const double m = v * std::pow(t, k);
          double lv = (b - 1.0) * std::log1p(-m) + log_kernel_rel(m, mode);
          if (power != 0.0) lv += power * std::log(t);
          return std::exp(lv);
        };
        log_prefactor = a * std::log(v) + std::log(k);
        value = integrate(f, 0.0, 1.0, quad).value;
      } else if (v == 1.0) {
        const double k = b < 1.0 ? 1.0 / b : 1.0;
        const double power = b < 1.0 ? 0.0 : b - 1.0;
        const double span = 1.0 - u;
        auto f = [&](double s) {
          const double m = 1.0 - span * std::pow(s, k);
          double lv = (a - 1.0) * std::log(m) + log_kernel_rel(m, mode);
          if (power != 0.0) lv += power * std::log(s);
          return std::exp(lv);
        };
        log_prefactor = b * std::log(span) + std::log(k);
        value = integrate(f, 0.0, 1.0, quad).value;
      } else {
        auto f = [&](double m) {
          return std::exp((a - 1.0) * std::log(m) + (b - 1.0) * std::log1p(-m) +
                          log_kernel_rel(m, mode));
        };
        value = integrate(f, u, v, quad).value;
      }
      if (value > 0.0) {
        total = log_add_exp(total, log_prefactor + std::log(value));
      }
    }
    return total + log_kernel_at(mode) - log_beta(a, b);
  }
};

}  // namespace

std::string_view param_name(Param p) { return kNames[static_cast<std::size_t>(p)]; }

double& ModelParams::operator[](Param slot) { return this->*kSlots[static_cast<std::size_t>(slot)]; }

double ModelParams::operator[](Param slot) const {
  return this->*kSlots[static_cast<std::size_t>(slot)];
}

std::array<double, kNumParams> ModelParams::to_array() const {
  std::array<double, kNumParams> out{};
  for (std::size_t i = 0; i < kNumParams; ++i) out[i] = this->*kSlots[i];
  return out;
}

ModelParams ModelParams::from_array(const std::array<double, kNumParams>& values) {
  ModelParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) p.*kSlots[i] = values[i];
  return p;
}

double ModelParams::mediator_mean(double x) const { return expit(alpha0 + alpha1 * x); }

void ModelParams::validate() const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!std::isfinite(this->*kSlots[i])) {
      throw std::domain_error("ModelParams: " + std::string(kNames[i]) + " is not finite");
    }
  }
  if (!(delta_err > 0.0)) throw std::domain_error("ModelParams: delta must be positive");
  if (!(phi > 0.0)) throw std::domain_error("ModelParams: phi must be positive");
}

ZeroMechanism ZeroMechanism::exponential(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("exponential zero mechanism requires eta > 0");
  }
  return ZeroMechanism(Kind::Exponential, eta);
}

double ZeroMechanism::prob_zero(double m, double l) const {
  if (m <= 0.0) return 1.0;
  if (kind_ == Kind::Lod) return m * l < 1.0 ? 1.0 : 0.0;
  return std::exp(-eta_ * m * l);
}

bool ModelConfig::is_free(Param slot) const {
  switch (slot) {
    case Param::beta2:
    case Param::gamma0:
    case Param::gamma1:
      return zero_inflated;
    case Param::beta4:
      return zero_inflated && include_interaction_indicator;
    case Param::beta5:
      return include_interaction_linear;
    default:
      return true;
  }
}

std::vector<Param> ModelConfig::free_params() const {
  std::vector<Param> out;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto slot = static_cast<Param>(i);
    if (is_free(slot)) out.push_back(slot);
  }
  return out;
}

ModelParams ModelConfig::pinned(ModelParams p) const {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto slot = static_cast<Param>(i);
    if (!is_free(slot)) p[slot] = 0.0;
  }
  return p;
}

double ModelConfig::zero_probability(const ModelParams& p, double x) const {
  return zero_inflated ? expit(p.gamma0 + p.gamma1 * x) : 0.0;
}

void ModelConfig::validate() const { quadrature.validate(); }

Eigen::VectorXd pack(const ModelParams& p, const ModelConfig& cfg) {
  const auto slots = cfg.free_params();
  Eigen::VectorXd out(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) out(static_cast<Eigen::Index>(i)) = p[slots[i]];
  return out;
}

ModelParams unpack(const Eigen::VectorXd& free, const ModelConfig& cfg) {
  const auto slots = cfg.free_params();
  if (static_cast<std::size_t>(free.size()) != slots.size()) {
    throw std::invalid_argument("unpack: vector length does not match the free dimension");
  }
  ModelParams p = cfg.pinned(ModelParams{});
  for (std::size_t i = 0; i < slots.size(); ++i) p[slots[i]] = free(static_cast<Eigen::Index>(i));
  return p;
}

void SubjectRecord::validate() const {
  if (!std::isfinite(y) || !std::isfinite(x)) {
    throw std::domain_error("SubjectRecord: y and x must be finite");
  }
  if (!(m_obs >= 0.0 && m_obs < 1.0)) {
    throw std::domain_error("SubjectRecord: m_obs must lie in [0, 1)");
  }
  if (!(l >= 1.0) || !std::isfinite(l)) {
    throw std::domain_error("SubjectRecord: library size must be >= 1");
  }
}

LikelihoodError::LikelihoodError(std::size_t subject, const std::string& what)
    : std::runtime_error("subject " + std::to_string(subject) + ": " + what), subject_(subject) {}

double outcome_mean(double m, bool present, double x, const ModelParams& p) {
  const double ind = present ? 1.0 : 0.0;
  return p.beta0 + p.beta1 * m + p.beta2 * ind + p.beta3 * x + p.beta4 * x * ind +
         p.beta5 * x * m;
}

double outcome_mean(double m, bool present, double x, const ModelParams& p,
                    const ModelConfig& cfg) {
  return outcome_mean(m, present, x, cfg.pinned(p));
}

double loglik_group1(const SubjectRecord& rec, const ModelParams& raw, const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  const double mu = p.mediator_mean(rec.x);
  const double a = mu * p.phi;
  const double b = (1.0 - mu) * p.phi;
  if (!(p.delta_err > 0.0) || !(a > 0.0) || !(b > 0.0)) {
    return kNegInf;
  }
  const double resid = rec.y - outcome_mean(rec.m_obs, true, rec.x, p);
  double out = -kLnSqrt2Pi - std::log(p.delta_err) -
               resid * resid / (2.0 * p.delta_err * p.delta_err);
  if (cfg.zero_inflated) {
    out += log_expit(-(p.gamma0 + p.gamma1 * rec.x));  // ln(1 - Delta)
  }
  out += (a - 1.0) * std::log(rec.m_obs) + (b - 1.0) * std::log1p(-rec.m_obs) - log_beta(a, b);
  if (cfg.mechanism.kind() == ZeroMechanism::Kind::Exponential) {
    // Detection probability; free of the model parameters but part of the density.
    out += std::log(-std::expm1(-cfg.mechanism.eta() * rec.m_obs * rec.l));
  }
  return out;
}

double log_false_zero_mass(const SubjectRecord& rec, const ModelParams& raw,
                           const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  const double mu = p.mediator_mean(rec.x);
  BetaWindowMass mass;
  mass.a = mu * p.phi;
  mass.b = (1.0 - mu) * p.phi;
  if (!(mass.a > 0.0) || !(mass.b > 0.0) || !(p.delta_err > 0.0)) {
    return kNegInf;
  }
  if (cfg.mechanism.kind() == ZeroMechanism::Kind::Lod) {
    mass.upper = std::min(1.0, 1.0 / rec.l);
  } else {
    mass.upper = 1.0;
    mass.thinning = cfg.mechanism.eta() * rec.l;
  }
  mass.gaussian = true;
  mass.centered = rec.y - outcome_mean(0.0, true, rec.x, p);
  mass.slope = p.beta1 + p.beta5 * rec.x;
  mass.scale = p.delta_err;
  return mass.log_mass(cfg.quadrature);
}

double loglik_group2(const SubjectRecord& rec, const ModelParams& raw, const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  if (!(p.delta_err > 0.0) || !(p.phi > 0.0)) {
    return kNegInf;
  }
  double structural = kNegInf;
  double false_zero = log_false_zero_mass(rec, p, cfg);
  if (cfg.zero_inflated) {
    const double eta = p.gamma0 + p.gamma1 * rec.x;
    const double r0 = rec.y - p.beta0 - p.beta3 * rec.x;
    structural = log_expit(eta) - r0 * r0 / (2.0 * p.delta_err * p.delta_err);
    false_zero += log_expit(-eta);
  }
  return -kLnSqrt2Pi - std::log(p.delta_err) + log_add_exp(structural, false_zero);
}

double loglik_subject(const SubjectRecord& rec, const ModelParams& p, const ModelConfig& cfg) {
  return rec.present() ? loglik_group1(rec, p, cfg) : loglik_group2(rec, p, cfg);
}

double loglik_total(std::span<const SubjectRecord> data, const ModelParams& p,
                    const ModelConfig& cfg) {
  // Neumaier compensated sum.
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double term;
    try {
      term = loglik_subject(data[i], p, cfg);
    } catch (const std::exception& e) {
      throw LikelihoodError(i, e.what());
    }
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  const double out = sum + comp;
  return std::isnan(out) ? kNegInf : out;
}

double observed_zero_probability(double x, double l, const ModelParams& raw,
                                 const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  const double delta = cfg.zero_probability(p, x);
  const double mu = p.mediator_mean(x);
  const double a = mu * p.phi;
  const double b = (1.0 - mu) * p.phi;
  double hidden;
  if (cfg.mechanism.kind() == ZeroMechanism::Kind::Lod) {
    hidden = boost::math::ibeta(a, b, std::min(1.0, 1.0 / l));
  } else {
    BetaWindowMass mass;
    mass.a = a;
    mass.b = b;
    mass.upper = 1.0;
    mass.thinning = cfg.mechanism.eta() * l;
    hidden = std::exp(mass.log_mass(cfg.quadrature));
  }
  return delta + (1.0 - delta) * hidden;
}

}  // namespace medzim

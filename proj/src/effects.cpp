#include "medzim/effects.hpp"

#include "medzim/dist.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>

namespace medzim {

namespace {

// Mediator law at one exposure value with first derivatives of the
// zero probability D, the Beta mean mu, and E(M) = (1 - D) mu.
struct MediatorLaw {
  double zero = 0.0;  // D
  double mu = 0.0;
  double mean = 0.0;  // (1 - D) mu
  double dzero_dg0 = 0.0, dzero_dg1 = 0.0;
  double dmean_da0 = 0.0, dmean_da1 = 0.0, dmean_dg0 = 0.0, dmean_dg1 = 0.0;

  MediatorLaw(const ModelParams& p, const ModelConfig& cfg, double x) {
    mu = p.mediator_mean(x);
    zero = cfg.zero_probability(p, x);
    mean = (1.0 - zero) * mu;
    const double dmu = mu * (1.0 - mu);
    dmean_da0 = (1.0 - zero) * dmu;
    dmean_da1 = dmean_da0 * x;
    if (cfg.zero_inflated) {
      dzero_dg0 = zero * (1.0 - zero);
      dzero_dg1 = dzero_dg0 * x;
      dmean_dg0 = -mu * dzero_dg0;
      dmean_dg1 = -mu * dzero_dg1;
    }
  }
};

using Full = std::array<double, kNumParams>;

double& at(Full& g, Param slot) { return g[static_cast<std::size_t>(slot)]; }

Full nie1_grad(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg) {
  const MediatorLaw m1(p, cfg, c.x1), m2(p, cfg, c.x2);
  const double diff = m2.mean - m1.mean;
  const double s = p.beta1 + p.beta5 * c.x2;
  Full g{};
  at(g, Param::beta1) = diff;
  at(g, Param::beta5) = c.x2 * diff;
  at(g, Param::alpha0) = s * (m2.dmean_da0 - m1.dmean_da0);
  at(g, Param::alpha1) = s * (m2.dmean_da1 - m1.dmean_da1);
  at(g, Param::gamma0) = s * (m2.dmean_dg0 - m1.dmean_dg0);
  at(g, Param::gamma1) = s * (m2.dmean_dg1 - m1.dmean_dg1);
  return g;
}

Full nie2_grad(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg) {
  const MediatorLaw m1(p, cfg, c.x1), m2(p, cfg, c.x2);
  const double diff = m1.zero - m2.zero;
  const double t = p.beta2 + p.beta4 * c.x2;
  Full g{};
  at(g, Param::beta2) = diff;
  at(g, Param::beta4) = c.x2 * diff;
  at(g, Param::gamma0) = t * (m1.dzero_dg0 - m2.dzero_dg0);
  at(g, Param::gamma1) = t * (m1.dzero_dg1 - m2.dzero_dg1);
  return g;
}

Full nde_grad(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg) {
  const MediatorLaw m1(p, cfg, c.x1);
  const double dx = c.x2 - c.x1;
  Full g{};
  at(g, Param::beta3) = dx;
  at(g, Param::beta4) = dx * (1.0 - m1.zero);
  at(g, Param::beta5) = dx * m1.mean;
  at(g, Param::alpha0) = p.beta5 * dx * m1.dmean_da0;
  at(g, Param::alpha1) = p.beta5 * dx * m1.dmean_da1;
  at(g, Param::gamma0) = dx * (-p.beta4 * m1.dzero_dg0 + p.beta5 * m1.dmean_dg0);
  at(g, Param::gamma1) = dx * (-p.beta4 * m1.dzero_dg1 + p.beta5 * m1.dmean_dg1);
  return g;
}

Full cde_grad(const ExposureContrast& c) {
  if (!c.m_controlled) throw std::invalid_argument("CDE requires a controlled mediator value");
  const double m = *c.m_controlled;
  const double dx = c.x2 - c.x1;
  Full g{};
  at(g, Param::beta3) = dx;
  at(g, Param::beta4) = m > 0.0 ? dx : 0.0;
  at(g, Param::beta5) = m * dx;
  return g;
}

}  // namespace

std::string_view effect_name(Effect e) {
  switch (e) {
    case Effect::Nie1: return "NIE1";
    case Effect::Nie2: return "NIE2";
    case Effect::Nie: return "NIE";
    case Effect::Nde: return "NDE";
    case Effect::Cde: return "CDE";
  }
  return "?";
}

void ExposureContrast::validate() const {
  if (!std::isfinite(x1) || !std::isfinite(x2)) {
    throw std::invalid_argument("ExposureContrast: x1 and x2 must be finite");
  }
  if (x1 == x2) {
    throw std::invalid_argument("ExposureContrast: x1 and x2 must differ");
  }
  if (m_controlled && !(*m_controlled >= 0.0 && *m_controlled <= 1.0)) {
    throw std::invalid_argument("ExposureContrast: controlled mediator must lie in [0, 1]");
  }
}

double nie1(const ModelParams& raw, const ExposureContrast& c, const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  const MediatorLaw m1(p, cfg, c.x1), m2(p, cfg, c.x2);
  return (p.beta1 + p.beta5 * c.x2) * (m2.mean - m1.mean);
}

double nie2(const ModelParams& raw, const ExposureContrast& c, const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  return (p.beta2 + p.beta4 * c.x2) *
         (cfg.zero_probability(p, c.x1) - cfg.zero_probability(p, c.x2));
}

double nie(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg) {
  return nie1(p, c, cfg) + nie2(p, c, cfg);
}

double nde(const ModelParams& raw, const ExposureContrast& c, const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  const MediatorLaw m1(p, cfg, c.x1);
  const double dx = c.x2 - c.x1;
  return p.beta3 * dx + p.beta4 * dx * (1.0 - m1.zero) + p.beta5 * dx * m1.mean;
}

double cde(const ModelParams& raw, const ExposureContrast& c, const ModelConfig& cfg) {
  if (!c.m_controlled) throw std::invalid_argument("CDE requires a controlled mediator value");
  const ModelParams p = cfg.pinned(raw);
  const double m = *c.m_controlled;
  const double dx = c.x2 - c.x1;
  return p.beta3 * dx + p.beta4 * dx * (m > 0.0 ? 1.0 : 0.0) + p.beta5 * m * dx;
}

double effect_value(Effect e, const ModelParams& p, const ExposureContrast& c,
                    const ModelConfig& cfg) {
  switch (e) {
    case Effect::Nie1: return nie1(p, c, cfg);
    case Effect::Nie2: return nie2(p, c, cfg);
    case Effect::Nie: return nie(p, c, cfg);
    case Effect::Nde: return nde(p, c, cfg);
    case Effect::Cde: return cde(p, c, cfg);
  }
  return 0.0;
}

Eigen::VectorXd effect_gradient(Effect e, const ModelParams& raw, const ExposureContrast& c,
                                const ModelConfig& cfg) {
  const ModelParams p = cfg.pinned(raw);
  Full full{};
  switch (e) {
    case Effect::Nie1: full = nie1_grad(p, c, cfg); break;
    case Effect::Nie2: full = nie2_grad(p, c, cfg); break;
    case Effect::Nie: {
      const Full a = nie1_grad(p, c, cfg);
      const Full b = nie2_grad(p, c, cfg);
      for (std::size_t i = 0; i < kNumParams; ++i) full[i] = a[i] + b[i];
      break;
    }
    case Effect::Nde: full = nde_grad(p, c, cfg); break;
    case Effect::Cde: full = cde_grad(c); break;
  }
  const auto slots = cfg.free_params();
  Eigen::VectorXd g(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    g(static_cast<Eigen::Index>(i)) = full[static_cast<std::size_t>(slots[i])];
  }
  return g;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must lie in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

EffectInference delta_method(double estimate, const Eigen::VectorXd& gradient,
                             const Eigen::MatrixXd& cov, double level) {
  EffectInference out;
  out.estimate = estimate;
  const double var = gradient.dot(cov * gradient);
  const double scale = gradient.cwiseAbs().dot(cov.diagonal().cwiseAbs().cwiseSqrt());
  if (!std::isfinite(var) || var < -1e-10 * std::max(scale * scale, 1e-300)) {
    out.diagnostic = "negative delta-method variance";
    return out;
  }
  out.se = std::sqrt(std::max(var, 0.0));
  const double z = normal_critical_value(level);
  out.lo = estimate - z * out.se;
  out.hi = estimate + z * out.se;
  if (out.se > 0.0) {
    out.p_value = std::erfc(std::abs(estimate) / (out.se * std::sqrt(2.0)));
  } else {
    out.p_value = estimate == 0.0 ? 1.0 : 0.0;
  }
  out.available = true;
  return out;
}

EffectInference delta_ci(Effect e, const FitResult& fit, const ExposureContrast& c,
                         const ModelConfig& cfg, double level) {
  const double estimate = effect_value(e, fit.params_hat, c, cfg);
  if (!fit.cov_available) {
    EffectInference out;
    out.estimate = estimate;
    out.diagnostic = "covariance unavailable";
    return out;
  }
  return delta_method(estimate, effect_gradient(e, fit.params_hat, c, cfg), fit.cov_hat, level);
}

EffectEstimates estimate_effects(const FitResult& fit, const ExposureContrast& c,
                                 const ModelConfig& cfg, double level) {
  EffectEstimates out;
  out.has_cde = c.m_controlled.has_value();
  for (Effect e : kAllEffects) {
    if (e == Effect::Cde && !out.has_cde) continue;
    out[e] = delta_ci(e, fit, c, cfg, level);
  }
  return out;
}

}  // namespace medzim

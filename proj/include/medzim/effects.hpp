#pragma once

// Causal effects of an exposure change x1 -> x2 under the fitted model.
//
//   E(M_x)  = (1 - Delta(x)) mu(x)
//   NIE1    = (b1 + b5 x2) (E(M_x2) - E(M_x1))            numeric-scale change
//   NIE2    = (b2 + b4 x2) (Delta(x1) - Delta(x2))        presence change
//   NIE     = NIE1 + NIE2
//   NDE     = (x2 - x1) (b3 + b4 Pr(M_x1 > 0) + b5 E(M_x1))
//   CDE     = (x2 - x1) (b3 + b4 1(m > 0) + b5 m)

#include "medzim/estimate.hpp"
#include "medzim/model.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace medzim {

enum class Effect { Nie1, Nie2, Nie, Nde, Cde };

inline constexpr std::array<Effect, 5> kAllEffects = {Effect::Nie1, Effect::Nie2, Effect::Nie,
                                                      Effect::Nde, Effect::Cde};

std::string_view effect_name(Effect e);

struct ExposureContrast {
  double x1 = 0.0;
  double x2 = 1.0;
  std::optional<double> m_controlled;  // mediator level for CDE

  void validate() const;
};

double nie1(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg = {});
double nie2(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg = {});
double nie(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg = {});
double nde(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg = {});
/// Throws std::invalid_argument when c.m_controlled is absent.
double cde(const ModelParams& p, const ExposureContrast& c, const ModelConfig& cfg = {});

double effect_value(Effect e, const ModelParams& p, const ExposureContrast& c,
                    const ModelConfig& cfg = {});

/// Analytic gradient over the free coordinates of cfg, in cfg.free_params() order.
Eigen::VectorXd effect_gradient(Effect e, const ModelParams& p, const ExposureContrast& c,
                                const ModelConfig& cfg = {});

struct EffectInference {
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double p_value = 1.0;
  bool available = false;  // false when the CI is suppressed
  std::string diagnostic;
};

/// Two-sided standard-normal quantile for a central interval of `level`.
double normal_critical_value(double level);

/// Wald inference for a smooth function of the parameters given its value,
/// gradient and the parameter covariance.
EffectInference delta_method(double estimate, const Eigen::VectorXd& gradient,
                             const Eigen::MatrixXd& cov, double level = 0.95);

EffectInference delta_ci(Effect e, const FitResult& fit, const ExposureContrast& c,
                         const ModelConfig& cfg, double level = 0.95);

struct EffectEstimates {
  std::array<EffectInference, 5> by_effect{};
  bool has_cde = false;

  const EffectInference& operator[](Effect e) const {
    return by_effect[static_cast<std::size_t>(e)];
  }
  EffectInference& operator[](Effect e) { return by_effect[static_cast<std::size_t>(e)]; }
};

/// All five effects (CDE only when the contrast carries m_controlled).
EffectEstimates estimate_effects(const FitResult& fit, const ExposureContrast& c,
                                 const ModelConfig& cfg, double level = 0.95);

}  // namespace medzim

#pragma once

// Joint outcome / zero-inflated Beta mediator model and its log-likelihood.
//
// Outcome:   Y = b0 + b1 M + b2 1(M>0) + b3 X + b4 X 1(M>0) + b5 X M + e,  e ~ N(0, delta^2)
// Mediator:  M ~ ZIB(Delta(X), mu(X), phi),  logit mu = a0 + a1 X,  logit Delta = g0 + g1 X
// Observed:  M* = 0 whenever the zero mechanism fires, else M* = M.
//
// Subjects with M* > 0 contribute the joint density of (y, m*). Subjects
// with M* = 0 contribute the structural-zero branch plus the false-zero
// branch, the latter integrated over the mediator values the mechanism
// would hide.

#include "medzim/quadrature.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace medzim {

/// Slots of the flat parameter vector, in the fixed order
/// (b0, b1, b2, b3, b4, b5, delta, a0, a1, phi, g0, g1).
enum class Param : std::size_t {
  beta0,
  beta1,
  beta2,
  beta3,
  beta4,
  beta5,
  delta,
  alpha0,
  alpha1,
  phi,
  gamma0,
  gamma1,
};

inline constexpr std::size_t kNumParams = 12;

std::string_view param_name(Param p);

struct ModelParams {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double beta4 = 0.0;
  double beta5 = 0.0;
  double delta_err = 1.0;  // outcome error scale
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double phi = 1.0;  // Beta dispersion
  double gamma0 = 0.0;
  double gamma1 = 0.0;

  double& operator[](Param slot);
  double operator[](Param slot) const;

  std::array<double, kNumParams> to_array() const;
  static ModelParams from_array(const std::array<double, kNumParams>& values);

  /// Beta-part mean at exposure x.
  double mediator_mean(double x) const;

  /// Throws std::domain_error unless delta_err > 0, phi > 0 and everything is finite.
  void validate() const;
};

class ZeroMechanism {
 public:
  enum class Kind { Lod, Exponential };

  /// Pr(M* = 0 | M, L) = 1(M L < 1).
  static ZeroMechanism lod() { return ZeroMechanism(Kind::Lod, 0.0); }
  /// Pr(M* = 0 | M, L) = exp(-eta M L), eta > 0.
  static ZeroMechanism exponential(double eta);

  Kind kind() const { return kind_; }
  double eta() const { return eta_; }

  /// Probability of observing zero for true abundance m and library size l.
  double prob_zero(double m, double l) const;

 private:
  ZeroMechanism(Kind kind, double eta) : kind_(kind), eta_(eta) {}
  Kind kind_;
  double eta_;
};

struct ModelConfig {
  bool include_interaction_indicator = true;  // keep b4 X 1(M>0)
  bool include_interaction_linear = true;     // keep b5 X M
  /// With zero inflation off, Delta is identically 0 and b2, b4, g0, g1 are
  /// pinned. This is the model used for a mediator with no observed zeros.
  bool zero_inflated = true;
  ZeroMechanism mechanism = ZeroMechanism::lod();
  QuadratureSpec quadrature;

  bool is_free(Param slot) const;
  /// Free slots in the fixed order. Pinned slots are dropped.
  std::vector<Param> free_params() const;
  std::size_t dimension() const { return free_params().size(); }

  /// Copy of p with every pinned slot set to 0.
  ModelParams pinned(ModelParams p) const;

  /// Delta(x) = expit(g0 + g1 x), or 0 without zero inflation.
  double zero_probability(const ModelParams& p, double x) const;

  void validate() const;
};

/// Free coordinates of p in the fixed order.
Eigen::VectorXd pack(const ModelParams& p, const ModelConfig& cfg);
/// Inverse of pack; pinned slots come back as 0.
ModelParams unpack(const Eigen::VectorXd& free, const ModelConfig& cfg);

struct SubjectRecord {
  double y = 0.0;
  double m_obs = 0.0;  // observed relative abundance in [0, 1)
  double l = 1.0;      // library size
  double x = 0.0;      // exposure

  bool present() const { return m_obs > 0.0; }
  void validate() const;
};

/// Thrown when a subject's contribution cannot be evaluated.
class LikelihoodError : public std::runtime_error {
 public:
  LikelihoodError(std::size_t subject, const std::string& what);
  std::size_t subject() const { return subject_; }

 private:
  std::size_t subject_;
};

double outcome_mean(double m, bool present, double x, const ModelParams& p);
/// Same, with the config's pinned coefficients forced to 0.
double outcome_mean(double m, bool present, double x, const ModelParams& p,
                    const ModelConfig& cfg);

/// Contribution of a subject with m_obs > 0.
double loglik_group1(const SubjectRecord& rec, const ModelParams& p, const ModelConfig& cfg);

/// ln of the false-zero mass
///   int_W w(m) Beta(m; mu phi, (1 - mu) phi) exp(-(y - E[Y | m, present, x])^2 / (2 delta^2)) dm
/// with W = (0, min(1, 1/l)) and w = 1 under LOD, or W = (0, 1) and
/// w = exp(-eta m l) under the exponential mechanism. -inf for an empty window.
double log_false_zero_mass(const SubjectRecord& rec, const ModelParams& p, const ModelConfig& cfg);

/// Contribution of a subject with m_obs == 0. Throws QuadratureError on
/// non-convergence.
double loglik_group2(const SubjectRecord& rec, const ModelParams& p, const ModelConfig& cfg);

/// Dispatches on rec.present().
double loglik_subject(const SubjectRecord& rec, const ModelParams& p, const ModelConfig& cfg);

/// Complete log-likelihood, accumulated with compensated summation.
/// Per-record failures are rethrown as LikelihoodError with the record index.
double loglik_total(std::span<const SubjectRecord> data, const ModelParams& p,
                    const ModelConfig& cfg);

/// Model-implied Pr(M* = 0 | x, l).
double observed_zero_probability(double x, double l, const ModelParams& p, const ModelConfig& cfg);

}  // namespace medzim

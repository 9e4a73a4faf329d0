#pragma once

// Maximum-likelihood fitting of ModelParams and the observed Fisher
// information at the optimum.

#include "medzim/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace medzim {

/// Raised for inputs that the fit cannot accept (constant exposure, a
/// group with no members, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite-difference step h = max(minimum, relative * |z|).
struct StepRule {
  double relative = 1e-5;
  double minimum = 1e-5;
  double operator()(double z) const;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central-difference gradient. A non-finite probe halves that coordinate's
/// step once; a second failure throws NumericalError.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& z,
                                   const StepRule& rule = {});

/// Hessian from central differences of the central-difference gradient.
/// Not symmetrized.
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& z,
                                  const StepRule& rule = {});

/// Free coordinates with delta and phi mapped to their logs.
Eigen::VectorXd to_unconstrained(const ModelParams& p, const ModelConfig& cfg);
ModelParams from_unconstrained(const Eigen::VectorXd& z, const ModelConfig& cfg);

struct OptimizerSpec {
  int max_iters = 300;
  /// Convergence when max_j |dF/dz_j| <= grad_tol * max(1, |F|), F the
  /// negative log-likelihood in unconstrained coordinates.
  double grad_tol = 1e-6;
  int n_restarts = 1;
  std::uint64_t seed = 20240101;
  double jitter = 0.15;  // multiplicative start perturbation for restarts >= 1

  void validate() const;
};

struct FitResult {
  ModelParams params_hat;
  std::vector<Param> free_params;
  double loglik_at_max = 0.0;
  Eigen::MatrixXd info_obs;  // symmetrized, original parameterization
  Eigen::MatrixXd cov_hat;   // empty when !cov_available
  bool cov_available = false;
  double condition_number = 0.0;
  double info_asymmetry = 0.0;  // ||H - H^T||_F / ||H||_F before symmetrizing
  bool converged = false;
  int iterations = 0;
  double gradient_norm_at_max = 0.0;  // scaled, same units as grad_tol
  int restart_used = 0;
  std::vector<double> objective_trace;  // log-likelihood after each accepted step
  std::string diagnostic;

  /// Standard error of a free parameter; NaN when unavailable or pinned.
  double standard_error(Param slot) const;
};

/// Deterministic starting values from OLS / moment / logistic fits.
ModelParams initial_estimate(std::span<const SubjectRecord> data, const ModelConfig& cfg);

/// Observed information -d2l/dzeta2 at p over the free coordinates, with the
/// step rule h_j = max(1e-5, 1e-5 |zeta_j|). Returned unsymmetrized.
Eigen::MatrixXd observed_information(std::span<const SubjectRecord> data, const ModelParams& p,
                                     const ModelConfig& cfg);

/// Fits the model. Throws PreconditionError for unusable data.
FitResult fit(std::span<const SubjectRecord> data, const ModelConfig& cfg,
              const OptimizerSpec& opt = {});

}  // namespace medzim

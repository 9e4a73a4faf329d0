#include "medzim/estimate.hpp"

#include "medzim/dist.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace medzim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_log_scaled(Param slot) { return slot == Param::delta || slot == Param::phi; }

double clamp_probability(double p) { return std::clamp(p, 1e-8, 1.0 - 1e-8); }

// Logistic regression of the observed-zero indicator on x by Newton steps.
std::pair<double, double> logistic_fit(std::span<const SubjectRecord> data) {
  double b0 = 0.0;
  double b1 = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    Eigen::Vector2d score = Eigen::Vector2d::Zero();
    for (const auto& r : data) {
      const double pr = expit(b0 + b1 * r.x);
      const double z = r.present() ? 0.0 : 1.0;
      const double w = std::max(pr * (1.0 - pr), 1e-12);
      score += Eigen::Vector2d(1.0, r.x) * (z - pr);
      info += w * Eigen::Vector2d(1.0, r.x) * Eigen::RowVector2d(1.0, r.x);
    }
    const Eigen::Vector2d step = info.ldlt().solve(score);
    if (!step.allFinite()) break;
    b0 += step(0);
    b1 += step(1);
    b0 = std::clamp(b0, -10.0, 10.0);
    b1 = std::clamp(b1, -10.0, 10.0);
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  return {b0, b1};
}

struct Minimizer {
  Objective objective;  // negative log-likelihood in z
  const OptimizerSpec& spec;

  struct Outcome {
    Eigen::VectorXd z;
    double value = kInf;
    bool converged = false;
    int iterations = 0;
    double scaled_gradient = kInf;
    std::vector<double> trace;
    std::string diagnostic;
  };

  double scaled_norm(const Eigen::VectorXd& g, double f) const {
    return g.cwiseAbs().maxCoeff() / std::max(1.0, std::abs(f));
  }

  Eigen::MatrixXd initial_inverse_hessian(const Eigen::VectorXd& z) const {
    const Eigen::Index d = z.size();
    try {
      Eigen::MatrixXd h = numerical_hessian(objective, z);
      h = 0.5 * (h + h.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() == Eigen::Success) {
        return llt.solve(Eigen::MatrixXd::Identity(d, d));
      }
      Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index j = 0; j < d; ++j) {
        diag(j, j) = 1.0 / std::max(std::abs(h(j, j)), 1e-6);
      }
      return diag;
    } catch (const NumericalError&) {
      return Eigen::MatrixXd::Identity(d, d);
    }
  }

  Outcome run(Eigen::VectorXd z) const {
    Outcome out;
    double f = objective(z);
    if (!std::isfinite(f)) {
      out.diagnostic = "objective not finite at the starting point";
      out.z = z;
      return out;
    }
    Eigen::VectorXd g = numerical_gradient(objective, z);
    Eigen::MatrixXd inv_h = initial_inverse_hessian(z);
    out.trace.push_back(-f);

    int stalls = 0;
    for (int iter = 0; iter < spec.max_iters; ++iter) {
      out.iterations = iter;
      if (scaled_norm(g, f) <= spec.grad_tol) {
        out.converged = true;
        break;
      }
      Eigen::VectorXd dir = -inv_h * g;
      double slope = g.dot(dir);
      if (!(slope < 0.0) || !dir.allFinite()) {
        inv_h = Eigen::MatrixXd::Identity(z.size(), z.size()) / std::max(1.0, g.norm());
        dir = -inv_h * g;
        slope = g.dot(dir);
      }

      // Backtracking with the Armijo condition.
      double step = 1.0;
      double f_new = kInf;
      Eigen::VectorXd z_new;
      bool accepted = false;
      for (int k = 0; k < 60; ++k) {
        z_new = z + step * dir;
        try {
          f_new = objective(z_new);
        } catch (const LikelihoodError&) {
          // A trial point the likelihood cannot evaluate is treated as a failed step.
          f_new = kInf;
        }
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        out.diagnostic = "line search failed to decrease the objective";
        break;
      }

      Eigen::VectorXd g_new;
      try {
        g_new = numerical_gradient(objective, z_new);
      } catch (const NumericalError& e) {
        out.diagnostic = e.what();
        break;
      }
      const Eigen::VectorXd s = z_new - z;
      const Eigen::VectorXd y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(z.size(), z.size());
        inv_h = (eye - rho * s * y.transpose()) * inv_h * (eye - rho * y * s.transpose()) +
                rho * s * s.transpose();
      }
      const double decrease = f - f_new;
      z = z_new;
      f = f_new;
      g = g_new;
      out.trace.push_back(-f);
      stalls = decrease <= 1e-13 * std::max(1.0, std::abs(f)) ? stalls + 1 : 0;
      if (stalls >= 4) {
        out.diagnostic = "objective stalled";
        break;
      }
      out.iterations = iter + 1;
    }
    out.z = z;
    out.value = f;
    out.scaled_gradient = scaled_norm(g, f);
    out.converged = out.scaled_gradient <= spec.grad_tol;
    if (!out.converged && out.diagnostic.empty()) {
      out.diagnostic = "iteration limit reached";
    }
    return out;
  }
};

}  // namespace

double StepRule::operator()(double z) const { return std::max(minimum, relative * std::abs(z)); }

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& z,
                                   const StepRule& rule) {
  Eigen::VectorXd grad(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    double h = rule(z(j));
    for (int attempt = 0;; ++attempt) {
      Eigen::VectorXd up = z;
      Eigen::VectorXd down = z;
      up(j) += h;
      down(j) -= h;
      const double fu = f(up);
      const double fd = f(down);
      if (std::isfinite(fu) && std::isfinite(fd)) {
        grad(j) = (fu - fd) / (2.0 * h);
        break;
      }
      if (attempt == 1) {
        throw NumericalError("numerical_gradient: objective not finite near coordinate " +
                             std::to_string(j));
      }
      h *= 0.5;
    }
  }
  return grad;
}

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& z,
                                  const StepRule& rule) {
  const Eigen::Index d = z.size();
  Eigen::MatrixXd hess(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = rule(z(j));
    Eigen::VectorXd up = z;
    Eigen::VectorXd down = z;
    up(j) += h;
    down(j) -= h;
    hess.row(j) = (numerical_gradient(f, up, rule) - numerical_gradient(f, down, rule)) / (2.0 * h);
  }
  return hess;
}

Eigen::VectorXd to_unconstrained(const ModelParams& p, const ModelConfig& cfg) {
  const auto slots = cfg.free_params();
  Eigen::VectorXd z(static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double v = p[slots[i]];
    z(static_cast<Eigen::Index>(i)) = is_log_scaled(slots[i]) ? std::log(v) : v;
  }
  return z;
}

ModelParams from_unconstrained(const Eigen::VectorXd& z, const ModelConfig& cfg) {
  const auto slots = cfg.free_params();
  if (static_cast<std::size_t>(z.size()) != slots.size()) {
    throw std::invalid_argument("from_unconstrained: vector length does not match the free dimension");
  }
  ModelParams p = cfg.pinned(ModelParams{});
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double v = z(static_cast<Eigen::Index>(i));
    p[slots[i]] = is_log_scaled(slots[i]) ? std::exp(v) : v;
  }
  return p;
}

void OptimizerSpec::validate() const {
  if (max_iters < 1 || !(grad_tol > 0.0) || n_restarts < 1 || !(jitter >= 0.0)) {
    throw std::invalid_argument("OptimizerSpec: max_iters, grad_tol and n_restarts must be positive");
  }
}

double FitResult::standard_error(Param slot) const {
  if (!cov_available) return std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < free_params.size(); ++i) {
    if (free_params[i] == slot) {
      const auto k = static_cast<Eigen::Index>(i);
      return std::sqrt(std::max(0.0, cov_hat(k, k)));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

ModelParams initial_estimate(std::span<const SubjectRecord> data, const ModelConfig& cfg) {
  ModelParams p;
  const auto n = static_cast<Eigen::Index>(data.size());

  // Outcome coefficients by OLS, observed zeros taken at face value.
  const Param betas[] = {Param::beta0, Param::beta1, Param::beta2,
                         Param::beta3, Param::beta4, Param::beta5};
  std::vector<Param> cols;
  for (Param b : betas) {
    if (cfg.is_free(b)) cols.push_back(b);
  }
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = data[static_cast<std::size_t>(i)];
    const double ind = r.present() ? 1.0 : 0.0;
    y(i) = r.y;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double v = 0.0;
      switch (cols[c]) {
        case Param::beta0: v = 1.0; break;
        case Param::beta1: v = r.m_obs; break;
        case Param::beta2: v = ind; break;
        case Param::beta3: v = r.x; break;
        case Param::beta4: v = r.x * ind; break;
        case Param::beta5: v = r.x * r.m_obs; break;
        default: break;
      }
      design(i, static_cast<Eigen::Index>(c)) = v;
    }
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const double v = coef(static_cast<Eigen::Index>(c));
    p[cols[c]] = std::isfinite(v) ? v : 0.0;
  }
  const double rss = (y - design * coef).squaredNorm();
  p.delta_err = std::max(std::sqrt(rss / static_cast<double>(n)), 1e-3);

  // Mediator mean: linear moment fit of positive m on x, mapped to the
  // logit scale at xbar +/- sd(x).
  std::vector<const SubjectRecord*> pos;
  for (const auto& r : data) {
    if (r.present()) pos.push_back(&r);
  }
  double sx = 0.0, sxx = 0.0, sm = 0.0, sxm = 0.0;
  for (const auto* r : pos) {
    sx += r->x;
    sxx += r->x * r->x;
    sm += r->m_obs;
    sxm += r->x * r->m_obs;
  }
  const double np = static_cast<double>(pos.size());
  const double xbar = sx / np;
  const double mbar = sm / np;
  const double var_x = sxx / np - xbar * xbar;
  if (var_x > 1e-12) {
    const double slope = (sxm / np - xbar * mbar) / var_x;
    const double sd = std::sqrt(var_x);
    const double lo = logit(clamp_probability(mbar - slope * sd));
    const double hi = logit(clamp_probability(mbar + slope * sd));
    p.alpha1 = (hi - lo) / (2.0 * sd);
    p.alpha0 = 0.5 * (lo + hi) - p.alpha1 * xbar;
  } else {
    p.alpha0 = logit(clamp_probability(mbar));
    p.alpha1 = 0.0;
  }

  // Dispersion by method of moments around the fitted means.
  double num = 0.0, den = 0.0;
  for (const auto* r : pos) {
    const double mu = p.mediator_mean(r->x);
    num += mu * (1.0 - mu);
    den += (r->m_obs - mu) * (r->m_obs - mu);
  }
  p.phi = den > 0.0 ? std::clamp(num / den - 1.0, 0.5, 1e5) : 1e3;

  if (cfg.zero_inflated) {
    const auto [g0, g1] = logistic_fit(data);
    p.gamma0 = g0;
    p.gamma1 = g1;
  }
  return cfg.pinned(p);
}

Eigen::MatrixXd observed_information(std::span<const SubjectRecord> data, const ModelParams& p,
                                     const ModelConfig& cfg) {
  const Objective negll = [&](const Eigen::VectorXd& v) {
    return -loglik_total(data, unpack(v, cfg), cfg);
  };
  return numerical_hessian(negll, pack(p, cfg), StepRule{1e-5, 1e-5});
}

FitResult fit(std::span<const SubjectRecord> data, const ModelConfig& cfg, const OptimizerSpec& opt) {
  cfg.validate();
  opt.validate();
  if (data.empty()) {
    throw PreconditionError("fit: no records");
  }
  std::size_t n_present = 0;
  double x_min = data.front().x;
  double x_max = data.front().x;
  for (const auto& r : data) {
    r.validate();
    n_present += r.present() ? 1 : 0;
    x_min = std::min(x_min, r.x);
    x_max = std::max(x_max, r.x);
  }
  const std::size_t n_zero = data.size() - n_present;
  if (!(x_max > x_min)) {
    throw PreconditionError("fit: exposure x is constant");
  }
  if (n_present < 2) {
    throw PreconditionError("fit: fewer than two records with a positive mediator");
  }
  if (cfg.zero_inflated && n_zero == 0) {
    throw PreconditionError("fit: zero-inflated model needs at least one observed zero");
  }
  if (!cfg.zero_inflated && n_zero > 0) {
    throw PreconditionError("fit: observed zeros require the zero-inflated model");
  }

  const Objective negll = [&](const Eigen::VectorXd& z) {
    return -loglik_total(data, from_unconstrained(z, cfg), cfg);
  };
  const Minimizer minimizer{negll, opt};

  const ModelParams start = initial_estimate(data, cfg);
  Rng rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Minimizer::Outcome best;
  int best_restart = -1;
  std::vector<std::string> notes;
  for (int restart = 0; restart < opt.n_restarts; ++restart) {
    ModelParams trial = start;
    if (restart > 0) {
      for (Param slot : cfg.free_params()) {
        const double e = opt.jitter * normal(rng);
        trial[slot] = is_log_scaled(slot) ? trial[slot] * std::exp(e) : trial[slot] * (1.0 + e);
      }
    }
    Minimizer::Outcome run;
    try {
      run = minimizer.run(to_unconstrained(trial, cfg));
    } catch (const std::exception& e) {
      notes.push_back("restart " + std::to_string(restart) + ": " + e.what());
      continue;
    }
    if (!run.diagnostic.empty()) {
      notes.push_back("restart " + std::to_string(restart) + ": " + run.diagnostic);
    }
    // Prefer converged runs, then the larger log-likelihood.
    const bool better = best_restart < 0 || (run.converged && !best.converged) ||
                        (run.converged == best.converged && run.value < best.value);
    if (better && std::isfinite(run.value)) {
      best = std::move(run);
      best_restart = restart;
    }
  }

  FitResult out;
  out.free_params = cfg.free_params();
  if (best_restart < 0) {
    out.params_hat = start;
    out.loglik_at_max = -kInf;
    out.diagnostic = "all restarts failed";
    for (const auto& n : notes) out.diagnostic += "; " + n;
    return out;
  }

  out.params_hat = from_unconstrained(best.z, cfg);
  out.loglik_at_max = -best.value;
  out.converged = best.converged;
  out.iterations = best.iterations;
  out.gradient_norm_at_max = best.scaled_gradient;
  out.restart_used = best_restart;
  out.objective_trace = std::move(best.trace);
  if (!out.converged) {
    out.diagnostic = "not converged";
    for (const auto& n : notes) out.diagnostic += "; " + n;
  }

  try {
    const Eigen::MatrixXd raw = observed_information(data, out.params_hat, cfg);
    const double norm = raw.norm();
    out.info_asymmetry = norm > 0.0 ? (raw - raw.transpose()).norm() / norm : 0.0;
    out.info_obs = 0.5 * (raw + raw.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.info_obs);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lo = lambda.minCoeff();
    const double hi = lambda.cwiseAbs().maxCoeff();
    out.condition_number = lo > 0.0 ? hi / lo : kInf;
    if (lo > 0.0 && out.condition_number < 1e13) {
      out.cov_hat = eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() *
                    eig.eigenvectors().transpose();
      out.cov_available = true;
    } else {
      std::ostringstream msg;
      msg << "observed information singular or indefinite (min eigenvalue " << lo << ")";
      out.diagnostic += out.diagnostic.empty() ? msg.str() : "; " + msg.str();
    }
  } catch (const std::exception& e) {
    out.diagnostic += std::string(out.diagnostic.empty() ? "" : "; ") +
                      "observed information failed: " + e.what();
  }
  return out;
}

}  // namespace medzim

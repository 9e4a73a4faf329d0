#pragma once

// Per-taxon mediation screening over a relative-abundance table, with
// Benjamini-Hochberg adjustment and discovery bookkeeping.

#include "medzim/effects.hpp"
#include "medzim/estimate.hpp"
#include "medzim/model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace medzim {

struct TaxaTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> taxa_names;
  Eigen::MatrixXd ra;  // samples x taxa, entries in [0, 1]
  std::vector<double> library_size;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t n_samples() const { return static_cast<std::size_t>(ra.rows()); }
  std::size_t n_taxa() const { return static_cast<std::size_t>(ra.cols()); }

  /// Throws std::invalid_argument on inconsistent shapes, RA outside [0,1],
  /// rows summing above 1 + 1e-6 or library sizes below 1.
  void validate() const;

  /// Single-mediator records for one taxon.
  std::vector<SubjectRecord> records(std::size_t taxon) const;
};

enum class TaxonStatus { Fitted, FitFailed, NotEstimable };

struct TaxonResult {
  std::string name;
  TaxonStatus status = TaxonStatus::NotEstimable;
  std::size_t n_positive = 0;
  std::size_t n_zero = 0;
  bool zero_inflated = false;  // model variant used
  EffectEstimates effects;
  std::optional<double> q_nie1;
  std::optional<double> q_nie2;
  bool significant_nie1 = false;
  bool significant_nie2 = false;
  bool converged = false;
  double condition_number = 0.0;
  std::string diagnostic;

  /// Converged fit with a usable NIE1 interval; only these enter BH.
  bool nie1_testable() const;
  /// Same for NIE2, which additionally needs observed zeros.
  bool nie2_testable() const;
};

struct ScreenResult {
  std::vector<TaxonResult> taxa;
  double fdr_target = 0.2;
  std::size_t n_failed = 0;
  std::size_t n_not_estimable = 0;
  std::vector<std::string> warnings;
};

struct ScreenOptions {
  /// Taxa positive in fewer samples than this are skipped as non-estimable.
  std::size_t min_positive = 5;
  std::size_t threads = 0;  // 0: hardware concurrency
  double level = 0.95;
};

/// Fits every taxon independently (taxon RA as the mediator). Taxa without
/// observed zeros use the model without zero inflation, which pins b2 and b4.
/// Throws std::runtime_error when no taxon could be fitted.
ScreenResult screen_all(const TaxaTable& table, const ModelConfig& cfg, const OptimizerSpec& opt,
                        const ExposureContrast& contrast, double fdr_target,
                        const ScreenOptions& options = {});

/// Benjamini-Hochberg step-up q-values, in input order.
std::vector<double> bh_adjust(std::span<const double> pvals);

struct DiscoveryMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::optional<double> recall;  // absent when there are no true mediators
  double precision = 1.0;        // 1 whenever FP = 0
  std::optional<double> f1;
};

DiscoveryMetrics discovery_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth);

/// taxa x samples matrix of sign(NIE1) (1 - p); missing where the taxon is
/// absent from the sample or has no NIE1 p-value.
std::vector<std::vector<std::optional<double>>> heatmap_matrix(const ScreenResult& result,
                                                               const TaxaTable& table);

}  // namespace medzim

#pragma once

// Data generators for the two simulation designs and replicate drivers
// that summarize bias, standard errors, coverage and discovery rates.

#include "medzim/dist.hpp"
#include "medzim/effects.hpp"
#include "medzim/estimate.hpp"
#include "medzim/model.hpp"
#include "medzim/screen.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace medzim {

/// 24 library sizes log-spaced over [31607, 911652], rounded to counts.
std::vector<double> default_library_pool();

/// Low relative-abundance truths: b = (-2, 100, 4, 5, 3, 0), delta = 1,
/// a = (-6.2, 0.4), phi = 50, g = (-1.16, -0.5).
ModelParams low_abundance_truth();
/// Same with a0 = -1.
ModelParams high_abundance_truth();

/// Stream for replicate `index` of a run seeded with `seed`.
Rng replicate_rng(std::uint64_t seed, std::uint64_t index);

struct Setting1Spec {
  std::size_t n = 100;
  ModelParams truth = low_abundance_truth();
  ZeroMechanism mechanism = ZeroMechanism::lod();
  std::vector<double> library_pool = default_library_pool();
  double x_probability = 0.5;  // X ~ Bernoulli(x_probability)

  void validate() const;
};

/// Draws n subjects. `latent`, when given, receives the true mediator values.
std::vector<SubjectRecord> gen_setting1(const Setting1Spec& spec, Rng& rng,
                                        std::vector<double>* latent = nullptr);

struct Setting2Spec {
  std::size_t n = 300;
  std::size_t k_plus_1 = 10;
  std::vector<double> alpha0_head = {-3.0, 1.0};
  std::vector<double> alpha1_head = {1.0, 1.5};
  double alpha0_tail_lo = 1.0, alpha0_tail_hi = 2.0;    // U(1, 2)
  double alpha1_tail_lo = -2.0, alpha1_tail_hi = -1.0;  // U(-2, -1)
  double phi = 50.0;
  double gamma0 = -1.5;
  double gamma1 = 1.0;
  std::array<double, 5> betas = {-1.73, 35.0, 2.0, 4.55, 1.0};  // b0..b4
  ZeroMechanism mechanism = ZeroMechanism::lod();
  std::vector<double> library_pool = default_library_pool();

  void validate() const;
};

struct Setting2Data {
  TaxaTable table;
  std::vector<bool> truth;  // true mediators (taxon 1 only)
  DirichletMixtureSpec dirichlet;
  std::vector<double> structural_zero;  // 1 where taxon 1 was a structural zero
};

/// Compositions from the zero-inflated Dirichlet; structural and false zeros
/// on taxon 1 only; y from the taxon-1 outcome equation with N(0,1) noise.
/// The random tail coefficients are drawn from rng first.
Setting2Data gen_setting2(const Setting2Spec& spec, Rng& rng);

struct AnalysisConfig {
  ModelConfig model;
  OptimizerSpec optimizer;
  ExposureContrast contrast;
  double level = 0.95;
  std::size_t threads = 0;
  std::uint64_t seed = 1;
};

struct SummaryRow {
  std::string name;
  double truth = 0.0;
  std::size_t n_used = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  std::optional<double> bias_pct;  // absent when the truth is 0
  double empirical_se = 0.0;       // NaN with fewer than two replicates
  double mean_se = 0.0;
  double coverage_pct = 0.0;
};

struct ReplicateSummary {
  std::vector<SummaryRow> rows;
  std::size_t n_reps = 0;
  std::size_t n_failed = 0;
  std::vector<std::string> failures;

  const SummaryRow& row(const std::string& name) const;
};

/// Setting-1 replicate study: NIE1, NIE2, NIE (and NDE, CDE when the
/// contrast allows) followed by every free parameter.
ReplicateSummary run_replicates(const Setting1Spec& spec, std::size_t n_reps,
                                const AnalysisConfig& analysis);

struct ScreeningReplicate {
  DiscoveryMetrics nie1;
  DiscoveryMetrics nie2;
  std::size_t n_failed_taxa = 0;
  bool failed = false;
  std::string diagnostic;
};

struct ScreeningSummary {
  std::size_t n_reps = 0;
  std::size_t n_failed = 0;
  std::vector<ScreeningReplicate> replicates;
  // Means of the per-replicate metrics.
  double recall_nie1 = 0.0;
  double precision_nie1 = 0.0;
  double f1_nie1 = 0.0;
  double recall_nie2 = 0.0;
  // F1 from the averaged recall and precision.
  double pooled_f1_nie1 = 0.0;
};

/// Setting-2 screening study at target FDR `fdr`.
ScreeningSummary run_screening_replicates(const Setting2Spec& spec, std::size_t n_reps,
                                          const AnalysisConfig& analysis, double fdr);

/// Columns: parameter, true, mean_estimate, bias, bias_pct, se, mean_se, cp_pct, n_used.
void write_summary_tsv(std::ostream& os, const ReplicateSummary& summary);

/// Columns: k_plus_1, n, reps, failed, recall_nie1, recall_nie2, precision_nie1, f1_nie1, pooled_f1_nie1.
void write_screening_tsv(std::ostream& os, const ScreeningSummary& summary, std::size_t k_plus_1,
                         std::size_t n);

}  // namespace medzim

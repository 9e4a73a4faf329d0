#include "medzim/screen.hpp"

#include "medzim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace medzim {

void TaxaTable::validate() const {
  const std::size_t n = n_samples();
  if (sample_ids.size() != n || library_size.size() != n || x.size() != n || y.size() != n) {
    throw std::invalid_argument("TaxaTable: per-sample fields do not match the RA row count");
  }
  if (taxa_names.size() != n_taxa()) {
    throw std::invalid_argument("TaxaTable: taxa names do not match the RA column count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (!((ra.row(row).array() >= 0.0).all() && (ra.row(row).array() <= 1.0).all())) {
      throw std::invalid_argument("TaxaTable: relative abundance outside [0, 1] in sample " +
                                  sample_ids[i]);
    }
    if (ra.row(row).sum() > 1.0 + 1e-6) {
      throw std::invalid_argument("TaxaTable: relative abundances sum above 1 in sample " +
                                  sample_ids[i]);
    }
    if (!(library_size[i] >= 1.0)) {
      throw std::invalid_argument("TaxaTable: library size below 1 in sample " + sample_ids[i]);
    }
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("TaxaTable: non-finite x or y in sample " + sample_ids[i]);
    }
  }
}

std::vector<SubjectRecord> TaxaTable::records(std::size_t taxon) const {
  std::vector<SubjectRecord> out(n_samples());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double m = ra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(taxon));
    // Beta support is open at 1; a taxon making up the whole sample is clamped.
    m = std::min(m, 1.0 - 1e-12);
    out[i] = SubjectRecord{y[i], m, library_size[i], x[i]};
  }
  return out;
}

bool TaxonResult::nie1_testable() const {
  return status == TaxonStatus::Fitted && converged && effects[Effect::Nie1].available;
}

bool TaxonResult::nie2_testable() const {
  return nie1_testable() && zero_inflated && effects[Effect::Nie2].available;
}

namespace {

TaxonResult analyze_taxon(const TaxaTable& table, std::size_t taxon, const ModelConfig& base,
                          const OptimizerSpec& opt, const ExposureContrast& contrast,
                          const ScreenOptions& options) {
  TaxonResult out;
  out.name = table.taxa_names[taxon];
  const auto data = table.records(taxon);
  for (const auto& r : data) {
    (r.present() ? out.n_positive : out.n_zero) += 1;
  }
  if (out.n_positive < std::max<std::size_t>(options.min_positive, 2)) {
    out.status = TaxonStatus::NotEstimable;
    out.diagnostic = "positive in " + std::to_string(out.n_positive) + " samples";
    return out;
  }
  ModelConfig cfg = base;
  cfg.zero_inflated = out.n_zero > 0;
  out.zero_inflated = cfg.zero_inflated;
  try {
    const FitResult fr = fit(data, cfg, opt);
    out.status = TaxonStatus::Fitted;
    out.converged = fr.converged;
    out.condition_number = fr.condition_number;
    out.diagnostic = fr.diagnostic;
    out.effects = estimate_effects(fr, contrast, cfg, options.level);
    if (!cfg.zero_inflated) {
      auto& n2 = out.effects[Effect::Nie2];
      n2.available = false;
      n2.diagnostic = "no observed zeros";
    }
  } catch (const std::exception& e) {
    out.status = TaxonStatus::FitFailed;
    out.diagnostic = e.what();
  }
  return out;
}

// BH over the testable subset; writes q-values and flags back.
template <typename Testable, typename PValue, typename Store>
void adjust_family(std::vector<TaxonResult>& taxa, double fdr, Testable testable, PValue pvalue,
                   Store store) {
  std::vector<std::size_t> members;
  std::vector<double> p;
  for (std::size_t i = 0; i < taxa.size(); ++i) {
    if (testable(taxa[i])) {
      members.push_back(i);
      p.push_back(pvalue(taxa[i]));
    }
  }
  const auto q = bh_adjust(p);
  for (std::size_t k = 0; k < members.size(); ++k) {
    store(taxa[members[k]], q[k], q[k] <= fdr);
  }
}

}  // namespace

ScreenResult screen_all(const TaxaTable& table, const ModelConfig& cfg, const OptimizerSpec& opt,
                        const ExposureContrast& contrast, double fdr_target,
                        const ScreenOptions& options) {
  table.validate();
  contrast.validate();
  if (!(fdr_target > 0.0 && fdr_target < 1.0)) {
    throw std::invalid_argument("screen_all: fdr_target must lie in (0, 1)");
  }
  ScreenResult out;
  out.fdr_target = fdr_target;
  out.taxa.resize(table.n_taxa());
  parallel_for(table.n_taxa(), options.threads, [&](std::size_t t) {
    out.taxa[t] = analyze_taxon(table, t, cfg, opt, contrast, options);
  });

  std::size_t fitted = 0;
  for (const auto& t : out.taxa) {
    switch (t.status) {
      case TaxonStatus::Fitted:
        ++fitted;
        if (!t.converged) out.warnings.push_back(t.name + ": fit did not converge (" + t.diagnostic + ")");
        break;
      case TaxonStatus::FitFailed:
        ++out.n_failed;
        out.warnings.push_back(t.name + ": fit failed (" + t.diagnostic + ")");
        break;
      case TaxonStatus::NotEstimable:
        ++out.n_not_estimable;
        break;
    }
  }
  if (fitted == 0) {
    throw std::runtime_error("screen_all: no taxon could be fitted");
  }

  adjust_family(
      out.taxa, fdr_target, [](const TaxonResult& t) { return t.nie1_testable(); },
      [](const TaxonResult& t) { return t.effects[Effect::Nie1].p_value; },
      [](TaxonResult& t, double q, bool sig) {
        t.q_nie1 = q;
        t.significant_nie1 = sig;
      });
  adjust_family(
      out.taxa, fdr_target, [](const TaxonResult& t) { return t.nie2_testable(); },
      [](const TaxonResult& t) { return t.effects[Effect::Nie2].p_value; },
      [](TaxonResult& t, double q, bool sig) {
        t.q_nie2 = q;
        t.significant_nie2 = sig;
      });
  return out;
}

std::vector<double> bh_adjust(std::span<const double> pvals) {
  const std::size_t m = pvals.size();
  for (double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bh_adjust: p-value outside [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> q(m);
  double running = 1.0;
  for (std::size_t rank = m; rank-- > 0;) {
    const std::size_t i = order[rank];
    running = std::min(running, static_cast<double>(m) * pvals[i] / static_cast<double>(rank + 1));
    q[i] = running;
  }
  return q;
}

DiscoveryMetrics discovery_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  if (flags.size() != truth.size()) {
    throw std::invalid_argument("discovery_metrics: flags and truth differ in length");
  }
  DiscoveryMetrics out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && truth[i]) ++out.tp;
    else if (flags[i]) ++out.fp;
    else if (truth[i]) ++out.fn;
    else ++out.tn;
  }
  if (out.tp + out.fn > 0) {
    out.recall = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn);
  }
  out.precision = out.fp == 0 ? 1.0 : static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp);
  if (out.recall) {
    const double r = *out.recall;
    out.f1 = r > 0.0 ? 2.0 * r * out.precision / (r + out.precision) : 0.0;
  }
  return out;
}

std::vector<std::vector<std::optional<double>>> heatmap_matrix(const ScreenResult& result,
                                                               const TaxaTable& table) {
  if (result.taxa.size() != table.n_taxa()) {
    throw std::invalid_argument("heatmap_matrix: result does not match the table");
  }
  std::vector<std::vector<std::optional<double>>> out(
      table.n_taxa(), std::vector<std::optional<double>>(table.n_samples()));
  for (std::size_t t = 0; t < table.n_taxa(); ++t) {
    const auto& taxon = result.taxa[t];
    if (!taxon.nie1_testable()) continue;
    const auto& inf = taxon.effects[Effect::Nie1];
    const double strength = (inf.estimate < 0.0 ? -1.0 : 1.0) * (1.0 - inf.p_value);
    for (std::size_t s = 0; s < table.n_samples(); ++s) {
      if (table.ra(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) > 0.0) {
        out[t][s] = strength;
      }
    }
  }
  return out;
}

}  // namespace medzim

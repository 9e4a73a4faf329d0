#include "medzim/simulate.hpp"

#include "medzim/format.hpp"
#include "medzim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace medzim {

namespace {

constexpr double kMaxAbundance = 1.0 - 1e-12;

double draw_library(const std::vector<double>& pool, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

bool mechanism_fires(const ZeroMechanism& mech, double m, double l, Rng& rng) {
  if (mech.kind() == ZeroMechanism::Kind::Lod) {
    return m * l < 1.0;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < mech.prob_zero(m, l);
}

void validate_pool(const std::vector<double>& pool) {
  if (pool.empty()) throw std::invalid_argument("library pool is empty");
  for (double l : pool) {
    if (!(l >= 1.0)) throw std::invalid_argument("library pool entries must be >= 1");
  }
}

struct Accumulator {
  std::string name;
  double truth = 0.0;
  std::vector<double> estimates;
  std::vector<double> ses;
  std::vector<bool> covered;

  SummaryRow summarize() const {
    SummaryRow r;
    r.name = name;
    r.truth = truth;
    r.n_used = estimates.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (estimates.empty()) {
      r.mean_estimate = r.bias = r.empirical_se = r.mean_se = r.coverage_pct = nan;
      return r;
    }
    const double n = static_cast<double>(estimates.size());
    r.mean_estimate = std::accumulate(estimates.begin(), estimates.end(), 0.0) / n;
    r.bias = r.mean_estimate - truth;
    if (truth != 0.0) r.bias_pct = 100.0 * r.bias / truth;
    if (estimates.size() >= 2) {
      double ss = 0.0;
      for (double e : estimates) ss += (e - r.mean_estimate) * (e - r.mean_estimate);
      r.empirical_se = std::sqrt(ss / (n - 1.0));
    } else {
      r.empirical_se = nan;
    }
    r.mean_se = std::accumulate(ses.begin(), ses.end(), 0.0) / n;
    r.coverage_pct =
        100.0 * static_cast<double>(std::count(covered.begin(), covered.end(), true)) / n;
    return r;
  }
};

}  // namespace

std::vector<double> default_library_pool() {
  constexpr double lo = 31607.0;
  constexpr double hi = 911652.0;
  constexpr int count = 24;
  std::vector<double> pool(count);
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    pool[static_cast<std::size_t>(i)] = std::round(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
  }
  return pool;
}

ModelParams low_abundance_truth() {
  ModelParams p;
  p.beta0 = -2.0;
  p.beta1 = 100.0;
  p.beta2 = 4.0;
  p.beta3 = 5.0;
  p.beta4 = 3.0;
  p.beta5 = 0.0;
  p.delta_err = 1.0;
  p.alpha0 = -6.2;
  p.alpha1 = 0.4;
  p.phi = 50.0;
  p.gamma0 = -1.16;
  p.gamma1 = -0.5;
  return p;
}

ModelParams high_abundance_truth() {
  ModelParams p = low_abundance_truth();
  p.alpha0 = -1.0;
  return p;
}

Rng replicate_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x6d656432u};
  return Rng(seq);
}

void Setting1Spec::validate() const {
  if (n < 2) throw std::invalid_argument("Setting1Spec: n must be at least 2");
  truth.validate();
  validate_pool(library_pool);
  if (!(x_probability > 0.0 && x_probability < 1.0)) {
    throw std::invalid_argument("Setting1Spec: x probability must lie in (0, 1)");
  }
}

std::vector<SubjectRecord> gen_setting1(const Setting1Spec& spec, Rng& rng,
                                        std::vector<double>* latent) {
  spec.validate();
  const ModelParams& p = spec.truth;
  std::bernoulli_distribution exposure(spec.x_probability);
  std::normal_distribution<double> noise(0.0, p.delta_err);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<SubjectRecord> out(spec.n);
  if (latent) latent->assign(spec.n, 0.0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double x = exposure(rng) ? 1.0 : 0.0;
    const double zero = expit(p.gamma0 + p.gamma1 * x);
    const double mu = p.mediator_mean(x);
    double m = 0.0;
    if (!(unif(rng) < zero)) {
      m = std::min(beta_sample(mu * p.phi, (1.0 - mu) * p.phi, rng), kMaxAbundance);
    }
    const double l = draw_library(spec.library_pool, rng);
    const double m_obs = (m > 0.0 && mechanism_fires(spec.mechanism, m, l, rng)) ? 0.0 : m;
    const double y = outcome_mean(m, m > 0.0, x, p) + noise(rng);
    out[i] = SubjectRecord{y, m_obs, l, x};
    if (latent) (*latent)[i] = m;
  }
  return out;
}

void Setting2Spec::validate() const {
  if (k_plus_1 < 2) throw std::invalid_argument("Setting2Spec: at least two taxa are required");
  if (n < 2) throw std::invalid_argument("Setting2Spec: n must be at least 2");
  if (alpha0_head.size() != alpha1_head.size()) {
    throw std::invalid_argument("Setting2Spec: head coefficient lengths differ");
  }
  if (!(phi > 0.0)) throw std::invalid_argument("Setting2Spec: phi must be positive");
  validate_pool(library_pool);
}

Setting2Data gen_setting2(const Setting2Spec& spec, Rng& rng) {
  spec.validate();
  const std::size_t k = spec.k_plus_1 - 1;
  Setting2Data out;
  DirichletMixtureSpec& dir = out.dirichlet;
  dir.phi = spec.phi;
  dir.gamma0 = spec.gamma0;
  dir.gamma1 = spec.gamma1;
  std::uniform_real_distribution<double> a0_tail(spec.alpha0_tail_lo, spec.alpha0_tail_hi);
  std::uniform_real_distribution<double> a1_tail(spec.alpha1_tail_lo, spec.alpha1_tail_hi);
  for (std::size_t j = 0; j < k; ++j) {
    if (j < spec.alpha0_head.size()) {
      dir.alpha0.push_back(spec.alpha0_head[j]);
      dir.alpha1.push_back(spec.alpha1_head[j]);
    } else {
      dir.alpha0.push_back(a0_tail(rng));
      dir.alpha1.push_back(a1_tail(rng));
    }
  }

  TaxaTable& t = out.table;
  const std::size_t n = spec.n;
  t.ra = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.k_plus_1));
  t.sample_ids.resize(n);
  t.library_size.resize(n);
  t.x.resize(n);
  t.y.resize(n);
  for (std::size_t j = 0; j < spec.k_plus_1; ++j) {
    t.taxa_names.push_back("taxon" + std::to_string(j + 1));
  }
  out.structural_zero.assign(n, 0.0);

  std::bernoulli_distribution exposure(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto& b = spec.betas;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "s%04zu", i + 1);
    t.sample_ids[i] = id;
    const double x = exposure(rng) ? 1.0 : 0.0;
    std::vector<double> comp = zid_sample(dir, x, rng);
    const double l = draw_library(spec.library_pool, rng);
    const double m1 = comp[0];
    out.structural_zero[i] = m1 == 0.0 ? 1.0 : 0.0;
    const double present = m1 > 0.0 ? 1.0 : 0.0;
    t.y[i] = b[0] + b[1] * m1 + b[2] * present + b[3] * x + b[4] * x * present + noise(rng);
    if (m1 > 0.0 && mechanism_fires(spec.mechanism, m1, l, rng)) {
      comp[0] = 0.0;
    }
    for (std::size_t j = 0; j < comp.size(); ++j) {
      t.ra(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = comp[j];
    }
    t.library_size[i] = l;
    t.x[i] = x;
  }
  out.truth.assign(spec.k_plus_1, false);
  out.truth[0] = true;
  return out;
}

const SummaryRow& ReplicateSummary::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("ReplicateSummary: no row named " + name);
}

ReplicateSummary run_replicates(const Setting1Spec& spec, std::size_t n_reps,
                                const AnalysisConfig& analysis) {
  if (n_reps < 1) throw std::invalid_argument("run_replicates: n_reps must be at least 1");
  spec.validate();
  analysis.contrast.validate();
  const ModelConfig& cfg = analysis.model;

  std::vector<Effect> effects = {Effect::Nie1, Effect::Nie2, Effect::Nie, Effect::Nde};
  if (analysis.contrast.m_controlled) effects.push_back(Effect::Cde);
  const auto params = cfg.free_params();

  struct Outcome {
    bool ok = false;
    std::string diagnostic;
    FitResult fit;
  };
  std::vector<Outcome> outcomes(n_reps);
  parallel_for(n_reps, analysis.threads, [&](std::size_t r) {
    Rng rng = replicate_rng(analysis.seed, r);
    const auto data = gen_setting1(spec, rng);
    Outcome& o = outcomes[r];
    try {
      o.fit = fit(data, cfg, analysis.optimizer);
      o.ok = o.fit.converged && o.fit.cov_available;
      if (!o.ok) o.diagnostic = o.fit.diagnostic;
    } catch (const std::exception& e) {
      o.diagnostic = e.what();
    }
  });

  std::vector<Accumulator> acc;
  for (Effect e : effects) {
    acc.push_back({std::string(effect_name(e)), effect_value(e, spec.truth, analysis.contrast, cfg), {}, {}, {}});
  }
  const ModelParams truth = cfg.pinned(spec.truth);
  for (Param p : params) {
    acc.push_back({std::string(param_name(p)), truth[p], {}, {}, {}});
  }

  const double z = normal_critical_value(analysis.level);
  ReplicateSummary out;
  out.n_reps = n_reps;
  for (std::size_t r = 0; r < n_reps; ++r) {
    const Outcome& o = outcomes[r];
    if (!o.ok) {
      ++out.n_failed;
      out.failures.push_back("replicate " + std::to_string(r) + ": " + o.diagnostic);
      continue;
    }
    std::size_t k = 0;
    for (Effect e : effects) {
      const auto inf = delta_ci(e, o.fit, analysis.contrast, cfg, analysis.level);
      Accumulator& a = acc[k++];
      a.estimates.push_back(inf.estimate);
      a.ses.push_back(inf.se);
      a.covered.push_back(inf.available && inf.lo <= a.truth && a.truth <= inf.hi);
    }
    for (Param p : params) {
      Accumulator& a = acc[k++];
      const double est = o.fit.params_hat[p];
      const double se = o.fit.standard_error(p);
      a.estimates.push_back(est);
      a.ses.push_back(se);
      a.covered.push_back(std::abs(est - a.truth) <= z * se);
    }
  }
  for (const auto& a : acc) out.rows.push_back(a.summarize());
  return out;
}

ScreeningSummary run_screening_replicates(const Setting2Spec& spec, std::size_t n_reps,
                                          const AnalysisConfig& analysis, double fdr) {
  if (n_reps < 1) throw std::invalid_argument("run_screening_replicates: n_reps must be at least 1");
  spec.validate();
  ScreeningSummary out;
  out.n_reps = n_reps;
  out.replicates.resize(n_reps);
  ScreenOptions options;
  options.threads = 1;
  options.level = analysis.level;

  parallel_for(n_reps, analysis.threads, [&](std::size_t r) {
    Rng rng = replicate_rng(analysis.seed, r);
    const Setting2Data data = gen_setting2(spec, rng);
    ScreeningReplicate& rep = out.replicates[r];
    try {
      const ScreenResult res =
          screen_all(data.table, analysis.model, analysis.optimizer, analysis.contrast, fdr, options);
      std::vector<bool> flags1(res.taxa.size()), flags2(res.taxa.size());
      for (std::size_t t = 0; t < res.taxa.size(); ++t) {
        flags1[t] = res.taxa[t].significant_nie1;
        flags2[t] = res.taxa[t].significant_nie2;
      }
      rep.nie1 = discovery_metrics(flags1, data.truth);
      rep.nie2 = discovery_metrics(flags2, data.truth);
      rep.n_failed_taxa = res.n_failed;
    } catch (const std::exception& e) {
      rep.failed = true;
      rep.diagnostic = e.what();
    }
  });

  double recall1 = 0.0, precision1 = 0.0, f1 = 0.0, recall2 = 0.0;
  std::size_t used = 0;
  for (const auto& rep : out.replicates) {
    if (rep.failed) {
      ++out.n_failed;
      continue;
    }
    ++used;
    recall1 += rep.nie1.recall.value_or(0.0);
    precision1 += rep.nie1.precision;
    f1 += rep.nie1.f1.value_or(0.0);
    recall2 += rep.nie2.recall.value_or(0.0);
  }
  if (used > 0) {
    const double u = static_cast<double>(used);
    out.recall_nie1 = recall1 / u;
    out.precision_nie1 = precision1 / u;
    out.f1_nie1 = f1 / u;
    out.recall_nie2 = recall2 / u;
    const double r = out.recall_nie1;
    const double p = out.precision_nie1;
    out.pooled_f1_nie1 = r + p > 0.0 ? 2.0 * r * p / (r + p) : 0.0;
  }
  return out;
}

void write_summary_tsv(std::ostream& os, const ReplicateSummary& summary) {
  os << "parameter\ttrue\tmean_estimate\tbias\tbias_pct\tse\tmean_se\tcp_pct\tn_used\n";
  for (const auto& r : summary.rows) {
    os << r.name << '\t' << format_number(r.truth) << '\t' << format_number(r.mean_estimate) << '\t'
       << format_number(r.bias) << '\t' << format_number(r.bias_pct) << '\t'
       << format_number(r.empirical_se) << '\t' << format_number(r.mean_se) << '\t'
       << format_number(r.coverage_pct) << '\t' << r.n_used << '\n';
  }
}

void write_screening_tsv(std::ostream& os, const ScreeningSummary& summary, std::size_t k_plus_1,
                         std::size_t n) {
  os << "k_plus_1\tn\treps\tfailed\trecall_nie1\trecall_nie2\tprecision_nie1\tf1_nie1\tpooled_f1_nie1\n";
  os << k_plus_1 << '\t' << n << '\t' << summary.n_reps << '\t' << summary.n_failed << '\t'
     << format_number(summary.recall_nie1) << '\t' << format_number(summary.recall_nie2) << '\t'
     << format_number(summary.precision_nie1) << '\t' << format_number(summary.f1_nie1) << '\t'
     << format_number(summary.pooled_f1_nie1) << '\n';
}

}  // namespace medzim

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include "medzim/commands.hpp"
#include "medzim/effects.hpp"
#include "medzim/estimate.hpp"
#include "medzim/io.hpp"
#include "medzim/model.hpp"
#include "medzim/screen.hpp"
#include "medzim/simulate.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace medzim;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240101;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

ModelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ModelParams p;
  p.beta0 = 2.0 * u(rng);
  p.beta1 = 30.0 * u(rng);
  p.beta2 = 3.0 * u(rng);
  p.beta3 = 3.0 * u(rng);
  p.beta4 = 3.0 * u(rng);
  p.beta5 = 5.0 * u(rng);
  p.delta_err = 1.0 + 0.5 * u(rng);
  p.alpha0 = -3.0 + 3.0 * u(rng);
  p.alpha1 = u(rng);
  p.phi = std::exp(2.5 + 1.5 * u(rng));
  p.gamma0 = -1.0 + u(rng);
  p.gamma1 = u(rng);
  return p;
}

Outcome criterion1() {
  Setting1Spec spec;
  spec.n = 100;
  AnalysisConfig a;
  a.model.include_interaction_linear = false;  // the generating model has b5 = 0
  a.seed = kSeed;
  const ReplicateSummary s = run_replicates(spec, 20, a);
  Outcome o;
  for (const char* name : {"NIE", "NIE1", "NIE2"}) {
    const auto& row = s.row(name);
    const double pct = row.bias_pct.value_or(NAN);
    if (!(std::abs(pct) <= 15.0)) o.pass = false;
    o.detail += fmt("%s bias%% %.2f; ", name, pct);
  }
  const double cp = s.row("NIE").coverage_pct;
  if (!(cp >= 80.0 && cp <= 100.0)) o.pass = false;
  o.detail += fmt("NIE CP %.1f; used %zu of 20", cp, 20 - s.n_failed);
  return o;
}

Outcome criterion2() {
  const double v = nie(high_abundance_truth(), {});
  return {std::abs(v - 9.85) <= 0.01, fmt("NIE true value %.6f", v)};
}

Outcome criterion3() {
  std::mt19937_64 rng(kSeed);
  Outcome o;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const ModelParams p = random_params(rng);
    const auto mc = oracle::mc_effects(p, 0.0, 1.0, 1000000, kSeed + static_cast<std::uint64_t>(i));
    const std::pair<double, oracle::McValue> cases[] = {
        {nie1(p, {}), mc.nie1}, {nie2(p, {}), mc.nie2}, {nde(p, {}), mc.nde}};
    for (const auto& [closed, sim] : cases) {
      const double z = std::abs(closed - sim.mean) / sim.se;
      worst = std::max(worst, z);
      if (!(z <= 3.0)) o.pass = false;
    }
  }
  o.detail = fmt("largest deviation %.2f MC standard errors over 30 comparisons", worst);
  return o;
}

Outcome criterion4() {
  std::mt19937_64 rng(kSeed + 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Outcome o;
  double worst = 0.0;
  int small_shape = 0;
  for (int i = 0; i < 100; ++i) {
    ModelParams p = random_params(rng);
    if (i % 3 == 0) {
      // Low relative abundance, where mu phi < 1.
      p.alpha0 = -7.0 + 3.0 * u(rng);
      p.phi = 5.0 + 60.0 * u(rng);
      p.beta1 = 100.0 * (u(rng) - 0.5);
    }
    ModelConfig cfg;
    SubjectRecord rec;
    rec.x = u(rng) < 0.5 ? 0.0 : 1.0;
    rec.m_obs = 0.0;
    if (i % 4 == 3) {
      cfg.mechanism = ZeroMechanism::exponential(std::exp(std::log(0.01) + u(rng) * std::log(100.0)));
      rec.l = std::exp(u(rng) * std::log(1e4));
    } else {
      rec.l = std::exp(u(rng) * std::log(1e6));
    }
    const double mu = expit(p.alpha0 + p.alpha1 * rec.x);
    small_shape += mu * p.phi < 1.0 ? 1 : 0;
    rec.y = outcome_mean(mu, true, rec.x, p) + p.delta_err * (2.0 * u(rng) - 1.0) * 2.0;
    const double got = loglik_group2(rec, p, cfg);
    const double ref = oracle::group2_midpoint(rec, p, cfg);
    const double rel = std::abs(got - ref) / std::abs(ref);
    worst = std::max(worst, rel);
    if (!(rel <= 1e-7)) o.pass = false;
  }
  o.detail = fmt("largest relative difference %.3g; %d cases with mu phi < 1", worst, small_shape);
  if (small_shape == 0) o.pass = false;
  return o;
}

Outcome criterion5() {
  std::mt19937_64 rng(kSeed + 5);
  Outcome o;
  double worst_grad = 0.0;
  const ModelConfig cfg;
  const auto free = cfg.free_params();
  for (int i = 0; i < 50; ++i) {
    const ModelParams p = random_params(rng);
    const ExposureContrast c{0.0, 1.0, 0.3};
    for (Effect e : kAllEffects) {
      const Eigen::VectorXd g = effect_gradient(e, p, c, cfg);
      for (std::size_t j = 0; j < free.size(); ++j) {
        // Fourth-order central difference.
        const double h = 1e-3 * std::max(1.0, std::abs(p[free[j]]));
        auto at = [&](double step) {
          ModelParams q = p;
          q[free[j]] += step;
          return effect_value(e, q, c, cfg);
        };
        const double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
        const double gj = g(static_cast<Eigen::Index>(j));
        const double scale = std::max({std::abs(gj), std::abs(fd), 1e-8});
        const double rel = std::abs(gj - fd) / scale;
        worst_grad = std::max(worst_grad, rel);
        if (!(rel <= 1e-6)) o.pass = false;
      }
    }
  }

  double worst_asym = 0.0, worst_inverse = 0.0;
  int fits = 0;
  for (const bool high : {false, true}) {
    Setting1Spec spec;
    if (high) spec.truth = high_abundance_truth();
    Rng data_rng = replicate_rng(kSeed, 0);
    const auto data = gen_setting1(spec, data_rng);
    ModelConfig fit_cfg;
    fit_cfg.include_interaction_linear = false;
    const FitResult f = fit(data, fit_cfg, {});
    ++fits;
    if (!f.cov_available) {
      o.pass = false;
      continue;
    }
    worst_asym = std::max(worst_asym, f.info_asymmetry);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(f.cov_hat.rows(), f.cov_hat.cols());
    worst_inverse = std::max(worst_inverse, (f.cov_hat * f.info_obs - eye).cwiseAbs().maxCoeff());
  }
  if (!(worst_asym <= 1e-6) || !(worst_inverse <= 1e-6)) o.pass = false;
  o.detail = fmt("gradient rel %.3g at 50 points; Hessian asymmetry %.3g; |cov info - I| %.3g over %d fits",
                 worst_grad, worst_asym, worst_inverse, fits);
  return o;
}

Outcome criterion6() {
  Setting2Spec spec;
  AnalysisConfig a;
  a.model.include_interaction_linear = false;  // the generating model has b5 = 0
  a.seed = kSeed;
  const ScreeningSummary s = run_screening_replicates(spec, 20, a, 0.2);
  const bool pass = s.recall_nie1 >= 0.75 && s.precision_nie1 >= 0.75;
  return {pass, fmt("recall %.3f, precision %.3f, F1 %.3f (pooled %.3f); %zu failed replicates",
                    s.recall_nie1, s.precision_nie1, s.f1_nie1, s.pooled_f1_nie1, s.n_failed)};
}

Outcome criterion7() {
  // Hand-computed step-up tables.
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> tables = {
      {{0.01, 0.02, 0.03}, {0.03, 0.03, 0.03}},
      {{0.04}, {0.04}},
      {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}},
      {{0.03, 0.01, 0.5, 0.04}, {0.16 / 3.0, 0.04, 0.5, 0.16 / 3.0}},
      {{0.001, 0.2, 0.2, 0.9}, {0.004, 0.8 / 3.0, 0.8 / 3.0, 0.9}},
      {{0.5, 0.4, 0.3, 0.2, 0.1}, {0.5, 0.5, 0.5, 0.5, 0.5}},
      {{0.001, 0.002, 0.9}, {0.003, 0.003, 0.9}},
      {{0.0, 0.8}, {0.0, 0.8}},
      {{0.02, 0.6, 0.04, 0.01}, {0.04, 0.6, 0.16 / 3.0, 0.04}},
      {{0.9, 0.05}, {0.9, 0.1}},
  };
  Outcome o;
  int exact = 0;
  for (const auto& [p, expect] : tables) {
    const auto q = bh_adjust(p);
    bool same = q.size() == expect.size();
    for (std::size_t i = 0; same && i < q.size(); ++i) {
      same = std::abs(q[i] - expect[i]) <= 1e-15 * std::max(1.0, expect[i]);
    }
    exact += same ? 1 : 0;
  }
  if (exact != 10) o.pass = false;

  // Global null: taxon 1 affects neither y directly nor through presence.
  Setting2Spec spec;
  spec.betas = {-1.73, 0.0, 0.0, 4.55, 0.0};
  AnalysisConfig a;
  a.model.include_interaction_linear = false;
  a.seed = kSeed + 7;
  const ScreeningSummary s = run_screening_replicates(spec, 50, a, 0.2);
  double fdp_sum = 0.0;
  std::size_t used = 0, with_discovery = 0;
  for (const auto& r : s.replicates) {
    if (r.failed) continue;
    ++used;
    const std::size_t found = r.nie1.tp + r.nie1.fp;
    with_discovery += found > 0 ? 1 : 0;
    fdp_sum += found > 0 ? static_cast<double>(r.nie1.fp) / static_cast<double>(found) : 0.0;
  }
  const double fdr = used ? fdp_sum / static_cast<double>(used) : NAN;
  if (!(fdr <= 0.25)) o.pass = false;
  o.detail = fmt("%d of 10 tables exact; global-null FDR %.3f over %zu replicates (%zu with discoveries)",
                 exact, fdr, used, with_discovery);
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion8() {
  const fs::path root = fs::temp_directory_path() / "medzim_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream log;
  Outcome o;
  int compared = 0;
  auto run_pair = [&](RunConfig cfg, const std::string& tag,
                      const std::function<int(const RunConfig&, std::ostream&)>& command,
                      std::vector<std::string> files) {
    for (std::size_t threads : {1u, 8u}) {
      cfg.threads = threads;
      cfg.out_dir = root / (tag + std::to_string(threads));
      if (command(cfg, log) != 0) o.pass = false;
    }
    for (const auto& f : files) {
      ++compared;
      const std::string a = slurp(root / (tag + "1") / f), b = slurp(root / (tag + "8") / f);
      if (a.empty() || a != b) {
        o.pass = false;
        o.detail += "differs: " + tag + "/" + f + "; ";
      }
    }
  };

  Setting2Spec spec;
  spec.n = 200;
  Rng rng = replicate_rng(kSeed, 0);
  write_table(gen_setting2(spec, rng).table, root / "ra.tsv", root / "meta.tsv");
  RunConfig analyze;
  analyze.command = RunConfig::Command::Analyze;
  analyze.ra_path = root / "ra.tsv";
  analyze.meta_path = root / "meta.tsv";
  analyze.seed = kSeed;
  analyze.contrast.m_controlled = 0.05;
  run_pair(analyze, "analyze", analyze_command, {"results.tsv", "heatmap.tsv", "run_manifest.json"});

  RunConfig sim1;
  sim1.command = RunConfig::Command::Simulate1;
  sim1.include_beta5 = false;
  sim1.reps = 8;
  sim1.seed = kSeed;
  run_pair(sim1, "simulate1_", simulate_command, {"summary.tsv", "run_manifest.json"});

  RunConfig sim2;
  sim2.command = RunConfig::Command::Simulate2;
  sim2.include_beta5 = false;
  sim2.reps = 3;
  sim2.seed = kSeed;
  sim2.emit_data = true;
  run_pair(sim2, "simulate2_", simulate_command,
           {"screening.tsv", "data_ra.tsv", "data_meta.tsv", "run_manifest.json"});
  o.detail += fmt("%d output files compared across 1 and 8 threads", compared);
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3,
                                                          criterion4, criterion5, criterion6,
                                                          criterion7, criterion8};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
              << "; " << fmt("%.1f s", secs) << ")" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

#include "medzim/commands.hpp"

#include "medzim/io.hpp"
#include "medzim/screen.hpp"
#include "medzim/simulate.hpp"

#include "json.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <cmath>
#include <sstream>

#ifndef MEDZIM_VERSION
#define MEDZIM_VERSION "0.0.0"
#endif

namespace medzim {

namespace {

ZeroMechanism mechanism_of(const RunConfig& cfg) {
  return cfg.mechanism == RunConfig::Mechanism::Lod ? ZeroMechanism::lod()
                                                    : ZeroMechanism::exponential(*cfg.eta);
}

std::vector<double> library_pool_of(const RunConfig& cfg) {
  return cfg.library_pool_path.empty() ? default_library_pool()
                                       : read_library_pool(cfg.library_pool_path);
}

AnalysisConfig analysis_of(const RunConfig& cfg) {
  AnalysisConfig a;
  a.model = cfg.model_config();
  a.optimizer = cfg.optimizer;
  a.contrast = cfg.contrast;
  a.threads = cfg.threads;
  a.seed = cfg.seed;
  return a;
}

std::string to_text(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

template <typename Body>
int guarded(const char* what, std::ostream& log, Body body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    log << what << ": configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << what << ": error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

const char* command_name(RunConfig::Command c) {
  switch (c) {
    case RunConfig::Command::Analyze: return "analyze";
    case RunConfig::Command::Simulate1: return "simulate1";
    case RunConfig::Command::Simulate2: return "simulate2";
  }
  return "unknown";
}

void RunConfig::validate() const {
  if (mechanism == Mechanism::Exponential) {
    if (!eta) throw ConfigError("the exponential mechanism needs --eta");
    if (!(*eta > 0.0) || !std::isfinite(*eta)) throw ConfigError("--eta must be a positive number");
  } else if (eta) {
    throw ConfigError("--eta applies to the exponential mechanism only");
  }
  if (!std::isfinite(contrast.x1) || !std::isfinite(contrast.x2)) {
    throw ConfigError("--x1 and --x2 must be finite");
  }
  if (contrast.m_controlled && !(*contrast.m_controlled >= 0.0 && *contrast.m_controlled < 1.0)) {
    throw ConfigError("--cde-m must lie in [0, 1)");
  }
  if (!(fdr > 0.0 && fdr < 1.0)) throw ConfigError("--fdr must lie in (0, 1)");
  try {
    optimizer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (command == Command::Analyze) {
    if (ra_path.empty() || meta_path.empty()) throw ConfigError("analyze needs --ra and --meta");
  } else {
    if (reps < 1) throw ConfigError("--reps must be at least 1");
    if (n && *n < 2) throw ConfigError("--n must be at least 2");
  }
  if (command == Command::Simulate1 && scenario != "low" && scenario != "high") {
    throw ConfigError("--scenario must be 'low' or 'high'");
  }
  if (command == Command::Simulate2 && taxa < 2) throw ConfigError("--taxa must be at least 2");
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.include_interaction_indicator = include_beta4;
  m.include_interaction_linear = include_beta5;
  m.mechanism = mechanism_of(*this);
  return m;
}

std::string run_manifest(const RunConfig& cfg) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["command"] = command_name(cfg.command);
  j["version"] = MEDZIM_VERSION;
  j["seed"] = cfg.seed;
  ordered_json model;
  model["mechanism"] = cfg.mechanism == RunConfig::Mechanism::Lod ? "lod" : "exp";
  model["eta"] = cfg.eta ? ordered_json(*cfg.eta) : ordered_json(nullptr);
  model["include_beta4"] = cfg.include_beta4;
  model["include_beta5"] = cfg.include_beta5;
  j["model"] = model;
  ordered_json contrast;
  contrast["x1"] = cfg.contrast.x1;
  contrast["x2"] = cfg.contrast.x2;
  contrast["cde_m"] = cfg.contrast.m_controlled ? ordered_json(*cfg.contrast.m_controlled)
                                                : ordered_json(nullptr);
  j["contrast"] = contrast;
  ordered_json opt;
  opt["max_iters"] = cfg.optimizer.max_iters;
  opt["grad_tol"] = cfg.optimizer.grad_tol;
  opt["n_restarts"] = cfg.optimizer.n_restarts;
  opt["seed"] = cfg.optimizer.seed;
  opt["jitter"] = cfg.optimizer.jitter;
  j["optimizer"] = opt;
  if (cfg.command == RunConfig::Command::Analyze) {
    j["ra"] = cfg.ra_path.string();
    j["meta"] = cfg.meta_path.string();
    j["fdr"] = cfg.fdr;
  } else {
    j["reps"] = cfg.reps;
    j["library_pool"] = cfg.library_pool_path.empty() ? ordered_json("built-in")
                                                      : ordered_json(cfg.library_pool_path.string());
    if (cfg.command == RunConfig::Command::Simulate1) {
      j["n"] = cfg.n.value_or(100);
      j["scenario"] = cfg.scenario;
    } else {
      j["n"] = cfg.n.value_or(300);
      j["taxa"] = cfg.taxa;
      j["fdr"] = cfg.fdr;
    }
  }
  ordered_json libs;
  libs["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                  "." + std::to_string(EIGEN_MINOR_VERSION);
  libs["boost"] = BOOST_LIB_VERSION;
  libs["compiler"] = __VERSION__;
  j["libraries"] = libs;
  return j.dump(2) + "\n";
}

int analyze_command(const RunConfig& cfg, std::ostream& log) {
  return guarded("analyze", log, [&] {
    cfg.validate();
    const IngestResult in = ingest(cfg.ra_path, cfg.meta_path);
    for (const auto& w : in.warnings) log << "warning: " << w << '\n';
    ScreenOptions options;
    options.threads = cfg.threads;
    const ScreenResult result = screen_all(in.table, cfg.model_config(), cfg.optimizer,
                                           cfg.contrast, cfg.fdr, options);
    for (const auto& w : result.warnings) log << "warning: " << w << '\n';
    const bool with_cde = cfg.contrast.m_controlled.has_value();
    std::filesystem::create_directories(cfg.out_dir);
    write_file_atomic(cfg.out_dir / "results.tsv",
                      to_text([&](std::ostream& os) { write_results_tsv(os, result, with_cde); }));
    write_file_atomic(cfg.out_dir / "heatmap.tsv",
                      to_text([&](std::ostream& os) { write_heatmap_tsv(os, result, in.table); }));
    write_file_atomic(cfg.out_dir / "run_manifest.json", run_manifest(cfg));
    std::size_t flagged = 0;
    for (const auto& t : result.taxa) flagged += t.significant_nie1 ? 1 : 0;
    log << "analyzed " << in.table.n_taxa() << " taxa over " << in.table.n_samples()
        << " samples; " << flagged << " significant for NIE1; " << result.n_failed
        << " failed; " << result.n_not_estimable << " not estimable\n";
  });
}

int simulate_command(const RunConfig& cfg, std::ostream& log) {
  const char* name = command_name(cfg.command);
  return guarded(name, log, [&] {
    cfg.validate();
    if (cfg.command == RunConfig::Command::Analyze) {
      throw ConfigError("simulate_command needs a simulate subcommand");
    }
    const AnalysisConfig analysis = analysis_of(cfg);
    std::string table;
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.command == RunConfig::Command::Simulate1) {
      Setting1Spec spec;
      spec.n = cfg.n.value_or(100);
      spec.truth = cfg.scenario == "high" ? high_abundance_truth() : low_abundance_truth();
      spec.mechanism = mechanism_of(cfg);
      spec.library_pool = library_pool_of(cfg);
      const ReplicateSummary summary = run_replicates(spec, cfg.reps, analysis);
      for (const auto& f : summary.failures) log << "warning: " << f << '\n';
      table = to_text([&](std::ostream& os) { write_summary_tsv(os, summary); });
      write_file_atomic(cfg.out_dir / "summary.tsv", table);
      log << "simulate1: " << cfg.reps - summary.n_failed << " of " << cfg.reps
          << " replicates used\n";
    } else {
      Setting2Spec spec;
      spec.n = cfg.n.value_or(300);
      spec.k_plus_1 = cfg.taxa;
      spec.mechanism = mechanism_of(cfg);
      spec.library_pool = library_pool_of(cfg);
      const ScreeningSummary summary = run_screening_replicates(spec, cfg.reps, analysis, cfg.fdr);
      for (std::size_t r = 0; r < summary.replicates.size(); ++r) {
        if (summary.replicates[r].failed) {
          log << "warning: replicate " << r << ": " << summary.replicates[r].diagnostic << '\n';
        }
      }
      table = to_text(
          [&](std::ostream& os) { write_screening_tsv(os, summary, spec.k_plus_1, spec.n); });
      write_file_atomic(cfg.out_dir / "screening.tsv", table);
      if (cfg.emit_data) {
        Rng rng = replicate_rng(cfg.seed, 0);
        const Setting2Data data = gen_setting2(spec, rng);
        write_table(data.table, cfg.out_dir / "data_ra.tsv", cfg.out_dir / "data_meta.tsv");
      }
      log << "simulate2: " << cfg.reps - summary.n_failed << " of " << cfg.reps
          << " replicates used\n";
    }
    write_file_atomic(cfg.out_dir / "run_manifest.json", run_manifest(cfg));
  });
}

}  // namespace medzim

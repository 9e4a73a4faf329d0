#pragma once

// Batch commands behind the command-line front end.

#include "medzim/effects.hpp"
#include "medzim/estimate.hpp"
#include "medzim/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace medzim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  enum class Command { Analyze, Simulate1, Simulate2 };
  enum class Mechanism { Lod, Exponential };

  Command command = Command::Analyze;
  std::filesystem::path ra_path;
  std::filesystem::path meta_path;
  std::filesystem::path library_pool_path;  // empty: built-in pool
  Mechanism mechanism = Mechanism::Lod;
  std::optional<double> eta;  // required with the exponential mechanism only
  ExposureContrast contrast;
  bool include_beta4 = true;
  bool include_beta5 = true;
  double fdr = 0.2;
  OptimizerSpec optimizer;
  std::uint64_t seed = 20240101;
  std::filesystem::path out_dir = ".";
  std::size_t threads = 0;  // 0: hardware concurrency; never changes results

  // Simulation settings.
  std::size_t reps = 100;
  std::optional<std::size_t> n;  // default 100 for simulate1, 300 for simulate2
  std::size_t taxa = 10;
  std::string scenario = "low";  // simulate1: "low" or "high" relative abundance
  bool emit_data = false;        // simulate2: also write the first replicate's data

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
  ModelConfig model_config() const;
};

const char* command_name(RunConfig::Command c);

/// Screens every taxon and writes results.tsv, heatmap.tsv and
/// run_manifest.json into cfg.out_dir. Returns 0 when all three are written.
int analyze_command(const RunConfig& cfg, std::ostream& log);

/// Runs a replicate study and writes summary.tsv (simulate1) or
/// screening.tsv (simulate2) plus run_manifest.json.
int simulate_command(const RunConfig& cfg, std::ostream& log);

/// The manifest text for cfg: every setting that affects results, plus
/// library versions. Execution-only settings (threads) are left out.
std::string run_manifest(const RunConfig& cfg);

}  // namespace medzim

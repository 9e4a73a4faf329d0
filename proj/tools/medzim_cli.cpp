#include "medzim/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

void add_common(CLI::App* app, medzim::RunConfig& cfg, std::string& mechanism,
                std::optional<double>& eta, std::optional<double>& cde_m, bool& no_beta4,
                bool& no_beta5) {
  app->add_option("--mechanism", mechanism, "zero-observation mechanism")
      ->check(CLI::IsMember({"lod", "exp"}))
      ->capture_default_str();
  app->add_option("--eta", eta, "rate of the exponential mechanism (> 0)");
  app->add_option("--x1", cfg.contrast.x1, "reference exposure level")->capture_default_str();
  app->add_option("--x2", cfg.contrast.x2, "comparison exposure level")->capture_default_str();
  app->add_option("--cde-m", cde_m, "mediator level for the controlled direct effect");
  app->add_flag("--no-beta4", no_beta4, "drop the X*1(M>0) interaction");
  app->add_flag("--no-beta5", no_beta5, "drop the X*M interaction");
  app->add_option("--fdr", cfg.fdr, "target false discovery rate")->capture_default_str();
  app->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app->add_option("--threads", cfg.threads, "worker threads (0: all cores)")->capture_default_str();
  app->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  app->add_option("--max-iters", cfg.optimizer.max_iters, "optimizer iteration limit")
      ->capture_default_str();
  app->add_option("--grad-tol", cfg.optimizer.grad_tol, "optimizer gradient tolerance")
      ->capture_default_str();
  app->add_option("--restarts", cfg.optimizer.n_restarts, "optimizer starts per fit")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mediation analysis with zero-inflated microbiome mediators"};
  app.require_subcommand(1);

  medzim::RunConfig cfg;
  std::string mechanism = "lod";
  std::optional<double> eta;
  std::optional<double> cde_m;
  bool no_beta4 = false;
  bool no_beta5 = false;
  std::optional<std::size_t> n;

  auto* analyze = app.add_subcommand("analyze", "screen every taxon of a data set");
  analyze->add_option("--ra", cfg.ra_path, "relative-abundance table")->required();
  analyze->add_option("--meta", cfg.meta_path, "metadata table")->required();
  add_common(analyze, cfg, mechanism, eta, cde_m, no_beta4, no_beta5);

  auto* sim1 = app.add_subcommand("simulate1", "single-taxon replicate study");
  sim1->add_option("--reps", cfg.reps, "number of replicates")->capture_default_str();
  sim1->add_option("--n", n, "samples per replicate (default 100)");
  sim1->add_option("--scenario", cfg.scenario, "relative-abundance scenario")
      ->check(CLI::IsMember({"low", "high"}))
      ->capture_default_str();
  sim1->add_option("--library-pool", cfg.library_pool_path, "file of library sizes to resample");
  add_common(sim1, cfg, mechanism, eta, cde_m, no_beta4, no_beta5);

  auto* sim2 = app.add_subcommand("simulate2", "multi-taxon screening study");
  sim2->add_option("--reps", cfg.reps, "number of replicates")->capture_default_str();
  sim2->add_option("--n", n, "samples per replicate (default 300)");
  sim2->add_option("--taxa", cfg.taxa, "number of taxa")->capture_default_str();
  sim2->add_option("--library-pool", cfg.library_pool_path, "file of library sizes to resample");
  sim2->add_flag("--emit-data", cfg.emit_data, "also write the first replicate's data set");
  add_common(sim2, cfg, mechanism, eta, cde_m, no_beta4, no_beta5);

  CLI11_PARSE(app, argc, argv);

  cfg.mechanism = mechanism == "exp" ? medzim::RunConfig::Mechanism::Exponential
                                     : medzim::RunConfig::Mechanism::Lod;
  cfg.eta = eta;
  cfg.contrast.m_controlled = cde_m;
  cfg.include_beta4 = !no_beta4;
  cfg.include_beta5 = !no_beta5;
  cfg.n = n;

  if (analyze->parsed()) {
    cfg.command = medzim::RunConfig::Command::Analyze;
    return medzim::analyze_command(cfg, std::cerr);
  }
  cfg.command = sim1->parsed() ? medzim::RunConfig::Command::Simulate1
                               : medzim::RunConfig::Command::Simulate2;
  return medzim::simulate_command(cfg, std::cerr);
}

// Command-line experiment runner.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "mucf/experiment.hpp"

namespace {

mucf::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  mucf::ExperimentConfig cfg = mucf::load_config(path);
  if (seed) cfg.seed = *seed;
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time simulator for fair scheduling in constrained queueing networks"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Override the seed given in the config");

  std::string config_path;
  std::string out_path;
  int reps = 1;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Run one experiment and write its CSV tables");
  std::string out_dir;
  bool record = false;
  run->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", out_dir, "Directory for the CSV tables (overrides the config)");
  run->add_flag("--record-packets", record, "Write the per-packet table and shadow log");

  auto* sweep = app.add_subcommand("sweep", "Grid over uniform load and scheduler kind");
  std::vector<double> rhos{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> schedulers{"mucf", "lqf", "ocf"};
  sweep->add_option("config", config_path, "Base JSON experiment config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--rho", rhos, "Uniform loads")->delimiter(',');
  sweep->add_option("--schedulers", schedulers, "Scheduler kinds")->delimiter(',');
  sweep->add_option("-r,--reps", reps, "Replications per grid point")->check(CLI::PositiveNumber);
  sweep->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");
  sweep->add_option("-o,--output", out_path, "CSV output file (default stdout)");

  auto* replicate = app.add_subcommand("replicate", "Independent-seed replications of one config");
  replicate->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  replicate->add_option("-r,--reps", reps, "Number of replications")->check(CLI::PositiveNumber);
  replicate->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");
  replicate->add_option("-o,--output", out_path, "CSV output file (default stdout)");
  bool per_run = false;
  replicate->add_flag("--per-run", per_run, "Print one summary row per replication instead");

  auto* validate = app.add_subcommand("validate-config", "Parse a config and report admissibility");
  validate->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);

  auto* accept = app.add_subcommand("acceptance", "Run the canned acceptance experiments");
  std::vector<int> only;
  accept->add_option("--only", only, "Criterion numbers to run")->delimiter(',')->check(CLI::Range(1, mucf::acceptance::kCriteria));
  accept->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      mucf::ExperimentConfig cfg = load(config_path, seed);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (record) cfg.record_packets = true;
      const auto result = mucf::run_experiment(cfg);
      mucf::write_summary_csv(std::cout, {result.summary});
    } else if (*sweep) {
      const mucf::ExperimentConfig cfg = load(config_path, seed);
      std::vector<mucf::SchedulerKind> kinds;
      for (const auto& s : schedulers) kinds.push_back(mucf::parse_scheduler_kind(s));
      const auto rows = mucf::run_sweep(cfg, rhos, kinds, reps, threads);
      std::ostringstream text;
      mucf::write_aggregate_csv(text, rows);
      emit(out_path, text.str());
    } else if (*replicate) {
      const mucf::ExperimentConfig cfg = load(config_path, seed);
      const auto agg = mucf::run_replications(cfg, reps, threads);
      std::ostringstream text;
      if (per_run) {
        mucf::write_summary_csv(text, agg.runs);
      } else {
        mucf::write_aggregate_csv(text, {agg});
      }
      emit(out_path, text.str());
    } else if (*validate) {
      const mucf::ExperimentConfig cfg = load(config_path, seed);
      std::cout << "ok: " << cfg.topology.n_queues() << " queues, horizon " << cfg.horizon
                << ", warmup " << cfg.warmup << ", seed " << cfg.seed << '\n';
      std::cout << "admissible: " << (cfg.admissibility.admissible ? "yes" : "no")
                << " (slack " << cfg.admissibility.slack << ")\n";
    } else if (*accept) {
      mucf::acceptance::Options opts;
      opts.only = only;
      opts.threads = threads;
      const auto results = mucf::acceptance::run(opts, std::cout);
      for (const auto& r : results) {
        if (!r.passed) return 1;
      }
    }
  } catch (const mucf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

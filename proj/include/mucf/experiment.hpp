#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mucf/analysis.hpp"
#include "mucf/core.hpp"
#include "mucf/election.hpp"
#include "mucf/schedulers.hpp"
#include "mucf/schedules.hpp"
#include "mucf/shadow.hpp"

namespace mucf {

struct TopologySpec {
  ScheduleKind kind = ScheduleKind::Switch;
  int ports = 2;                                // switch
  int nodes = 0;                                // conflict graph
  std::vector<std::pair<int, int>> edges;       // conflict graph
  int queues = 0;                               // explicit
  std::vector<std::vector<std::uint8_t>> schedules;  // explicit
  std::vector<int> outputs;                     // optional routing override

  int n_queues() const;
};

struct ExperimentConfig {
  std::string name = "run";
  TopologySpec topology;
  std::vector<double> lambda;   // resolved per-queue rates
  std::optional<double> rho;    // set when the config used a uniform load
  SchedulerSpec scheduler;
  ShadowPolicy shadow;
  OutputPolicy output_policy = OutputPolicy::ShadowDepartureOrder;
  std::vector<int> output_priority;  // StrictPriority output policy only
  Slot horizon = 500000;
  Slot warmup = 50000;
  std::uint64_t seed = 1;
  std::vector<Slot> checkpoints;  // sorted, each in [1, horizon]
  std::string output_dir;         // empty: no CSV files
  bool record_packets = false;
  bool check_invariants = false;
  bool lyapunov_per_slot = false;

  /// Filled by parse_config.
  AdmissibilityVerdict admissibility;
  std::vector<std::string> warnings;
};

/// Parse failure with the offending field path (e.g. "rates.rho").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Parses and validates a JSON experiment document. Runs the admissibility
/// pre-check; an inadmissible load is accepted with a warning.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Rates for a uniform load rho: rho/M per switch queue, rho/N otherwise.
std::vector<double> uniform_rates(const TopologySpec& topology, double rho);
std::shared_ptr<const ScheduleSet> build_schedule_set(const TopologySpec& topology);

/// splitmix64 finalizer over (seed, stream); used to derive independent
/// generator seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// One lockstep run of the real network and its shadow.
class Simulation {
 public:
  explicit Simulation(const ExperimentConfig& config);

  Slot tau() const { return tau_; }
  bool done() const { return tau_ >= config_.horizon; }
  /// Runs slot tau(). Throws std::logic_error when an invariant check fails.
  void step();
  void run();
  /// Closes the run: records the final probe sample and returns the metrics.
  RunMetrics finish();

  const Network& network() const { return network_; }
  const ShadowCFN& shadow() const { return shadow_; }
  const ExperimentConfig& config() const { return config_; }
  const UrgencyVector& urgencies() const { return urgencies_; }
  const FeasibleSchedule& last_schedule() const { return last_schedule_; }

 private:
  void observe_state();
  void check_state() const;
  void record_departure(const Packet& p);
  void resolve_shadow(const std::vector<std::pair<PacketId, Slot>>& departures);

  ExperimentConfig config_;
  std::shared_ptr<const ScheduleSet> set_;
  Network network_;
  ShadowCFN shadow_;
  Scheduler scheduler_;
  ArrivalProcess arrivals_;
  Slot tau_ = 0;
  std::size_t next_checkpoint_ = 0;
  UrgencyVector urgencies_;
  FeasibleSchedule last_schedule_;
  std::vector<std::uint8_t> arrival_buffer_;
  std::unordered_map<PacketId, PacketRecord> awaiting_shadow_;
  RunMetrics metrics_;
  bool finished_ = false;
};

/// Scalar outcome of one run.
struct SummaryRow {
  std::string name;
  std::string scheduler;
  double rho = 0.0;  // uniform load, or NaN
  std::uint64_t seed = 0;
  Slot slots = 0;
  Slot warmup = 0;
  std::int64_t samples = 0;
  double latency_mean = 0.0;
  double latency_second = 0.0;
  double oq_delay_mean = 0.0;
  double oq_delay_second = 0.0;
  double max_deviation_nominal = 0.0;
  double max_deviation_empirical = 0.0;
  bool stable = false;
};

SummaryRow summarize_run(const ExperimentConfig& config, const RunMetrics& metrics);

struct RunResult {
  RunMetrics metrics;
  SummaryRow summary;
};

/// Runs to the horizon and, when output_dir is set, writes packets.csv,
/// timeseries.csv, summary.csv and shadow_log.csv there.
RunResult run_experiment(const ExperimentConfig& config);

void write_packets_csv(std::ostream& out, const RunMetrics& metrics);
void write_timeseries_csv(std::ostream& out, const RunMetrics& metrics);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Mean and sample variance of each summary column across replications.
struct AggregateColumn {
  std::string column;
  double mean = 0.0;
  double variance = 0.0;
};

struct ReplicationSummary {
  std::string name;
  std::string scheduler;
  double rho = 0.0;
  std::vector<SummaryRow> runs;  // ordered by replication index
  std::vector<AggregateColumn> columns;
  std::int64_t stable_runs = 0;
};

/// Seed of replication k: the config seed for k = 0, derived otherwise.
std::uint64_t replication_seed(std::uint64_t base, int k);

/// Folds per-replication rows in replication-index order, so the result does
/// not depend on the order the rows were produced in.
ReplicationSummary aggregate_replications(std::vector<std::pair<int, SummaryRow>> rows);

/// Runs n_reps independent seeds on up to `threads` workers (0 = hardware
/// concurrency). A failing replication rethrows with its index attached.
ReplicationSummary run_replications(const ExperimentConfig& config, int n_reps, int threads = 0);

void write_aggregate_csv(std::ostream& out, const std::vector<ReplicationSummary>& rows);

/// Uniform-load grid over rho values and scheduler kinds.
std::vector<ReplicationSummary> run_sweep(const ExperimentConfig& base,
                                          const std::vector<double>& rhos,
                                          const std::vector<SchedulerKind>& schedulers,
                                          int n_reps, int threads = 0);

SchedulerKind parse_scheduler_kind(std::string_view name);

}  // namespace mucf

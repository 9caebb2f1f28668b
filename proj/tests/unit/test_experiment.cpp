#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mucf/experiment.hpp"

using namespace mucf;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "topology": {"kind": "switch", "ports": 2},
  "rates": {"uniform": 0.5},
  "scheduler": "mucf",
  "weight_function": "identity",
  "shadow_policy": "fifo",
  "horizon": 1000,
  "seed": 7
})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mucf_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

const AggregateColumn& column(const ReplicationSummary& s, const std::string& name) {
  return *std::find_if(s.columns.begin(), s.columns.end(),
                       [&](const AggregateColumn& c) { return c.column == name; });
}

ExperimentConfig small_switch(std::uint64_t seed, Slot horizon = 20000) {
  auto cfg = parse_config(kMinimal);
  cfg.horizon = horizon;
  cfg.warmup = horizon / 10;
  cfg.seed = seed;
  cfg.checkpoints = geometric_checkpoints(horizon);
  return cfg;
}

}  // namespace

TEST_CASE("minimal switch config parses and is admissible") {
  const auto cfg = parse_config(kMinimal);
  CHECK(cfg.topology.kind == ScheduleKind::Switch);
  CHECK(cfg.topology.ports == 2);
  CHECK(cfg.lambda == std::vector<double>(4, 0.25));
  CHECK(cfg.rho == 0.5);
  CHECK(cfg.admissibility.admissible);
  CHECK(cfg.warnings.empty());
  CHECK(cfg.warmup == 100);
  CHECK(cfg.output_policy == OutputPolicy::ShadowDepartureOrder);
  CHECK(cfg.checkpoints.back() == 1000);
}

TEST_CASE("rates above one are rejected") {
  CHECK(field_of(R"({"topology": {"kind": "switch", "ports": 2}, "rates": {"uniform": 1.2}})") ==
        "rates.uniform");
}

TEST_CASE("the overloaded 2x2 instance parses with a warning") {
  const auto cfg = parse_config(R"({
    "topology": {"kind": "switch", "ports": 2},
    "rates": {"matrix": [[0, 0.6], [0, 0.5]]},
    "scheduler": "lqf"
  })");
  CHECK_FALSE(cfg.admissibility.admissible);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(cfg.output_policy == OutputPolicy::Fifo);
}

TEST_CASE("schema violations name the offending field") {
  const std::string topo = R"("topology": {"kind": "switch", "ports": 2}, "rates": {"uniform": 0.5})";
  CHECK(field_of("{" + topo + R"(, "colour": 1})") == "colour");
  CHECK(field_of(R"({"rates": {"uniform": 0.5}})") == "topology");
  CHECK(field_of("{" + topo + R"(, "scheduler": "fastest"})") == "scheduler.kind");
  CHECK(field_of("{" + topo + R"(, "weight_function": {"kind": "linear", "slope": 5, "rho": 2}})") ==
        "weight_function");
  CHECK(field_of("{" + topo + R"(, "horizon": 100, "warmup": 100})") == "warmup");
  CHECK(field_of(R"({"topology": {"kind": "switch", "ports": 2}, "rates": {"uniform": 0.5, "vector": [0]}})") ==
        "rates");
  CHECK(field_of(R"({"topology": {"kind": "explicit", "queues": 2, "schedules": [[1, 0]]},
                     "rates": {"uniform": 0.1}})") == "topology.schedules");
  CHECK_THROWS(parse_config("{not json"));
}

TEST_CASE("conflict-graph and explicit topologies parse") {
  const auto cg = parse_config(R"({
    "topology": {"kind": "conflict_graph", "nodes": 3, "edges": [[0, 1], [1, 2]]},
    "rates": {"vector": [0.3, 0.2, 0.3]},
    "shadow_policy": {"kind": "strict_priority", "classes": [0, 1, 0]},
    "output_policy": "fifo"
  })");
  CHECK(cg.topology.n_queues() == 3);
  CHECK(cg.admissibility.admissible);
  CHECK(cg.shadow.kind == ShadowPolicyKind::StrictPriority);

  const auto ex = parse_config(R"({
    "topology": {"kind": "explicit", "queues": 4,
                 "schedules": [[1, 1, 0, 0], [0, 0, 1, 1]]},
    "rates": {"uniform": 0.8},
    "scheduler": {"kind": "ocf", "tie_break": "random"}
  })");
  CHECK(ex.lambda == std::vector<double>(4, 0.2));
  CHECK(ex.scheduler.kind == SchedulerKind::Ocf);
  CHECK(ex.scheduler.tie_break == TieBreak::SeededRandom);
}

TEST_CASE("seed derivation is a fixed function") {
  CHECK(derive_seed(1, 1) == derive_seed(1, 1));
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
  CHECK(replication_seed(99, 0) == 99);
  CHECK(replication_seed(99, 1) != 99);
}

TEST_CASE("a fixed seed reproduces every CSV byte for byte") {
  auto cfg = parse_config(kMinimal);
  cfg.record_packets = true;
  std::vector<std::string> files;
  for (int rep = 0; rep < 2; ++rep) {
    const auto dir = scratch_dir("determinism_" + std::to_string(rep));
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    std::string all;
    for (const char* f : {"packets.csv", "timeseries.csv", "summary.csv", "shadow_log.csv"}) {
      REQUIRE(fs::exists(dir / f));
      all += slurp(dir / f);
    }
    files.push_back(all);
    fs::remove_all(dir);
  }
  CHECK(files[0] == files[1]);
  CHECK(files[0].find("packet_id,queue,output,arrival,shadow_departure,real_departure") == 0);
}

TEST_CASE("CSV headers are fixed") {
  RunMetrics m;
  std::ostringstream p, t, s;
  write_packets_csv(p, m);
  write_timeseries_csv(t, m);
  write_summary_csv(s, {});
  CHECK(p.str() == "packet_id,queue,output,arrival,shadow_departure,real_departure\n");
  CHECK(t.str().rfind("tau,lyapunov,abs_wait,abs_delta", 0) == 0);
  CHECK(s.str() ==
        "name,scheduler,rho,seed,slots,warmup,samples,latency_mean,latency_second,"
        "log_latency_mean,log_latency_second,oq_delay_mean,oq_delay_second,"
        "max_deviation_nominal,max_deviation_empirical,stable\n");
}

TEST_CASE("one replication equals a single run") {
  const auto cfg = small_switch(61, 5000);
  const auto single = run_experiment(cfg).summary;
  const auto agg = run_replications(cfg, 1, 1);
  REQUIRE(agg.runs.size() == 1);
  const auto& r = agg.runs[0];
  CHECK(r.seed == single.seed);
  CHECK(r.samples == single.samples);
  CHECK(r.latency_mean == single.latency_mean);
  CHECK(r.latency_second == single.latency_second);
  CHECK(r.oq_delay_mean == single.oq_delay_mean);
  CHECK(r.max_deviation_nominal == single.max_deviation_nominal);
  CHECK(column(agg, "latency_mean").variance == 0.0);
}

TEST_CASE("aggregates do not depend on thread count or completion order") {
  const auto cfg = small_switch(62, 5000);
  const auto serial = run_replications(cfg, 8, 1);
  const auto parallel = run_replications(cfg, 8, 4);
  std::ostringstream a, b;
  write_aggregate_csv(a, {serial});
  write_aggregate_csv(b, {parallel});
  CHECK(a.str() == b.str());

  std::vector<std::pair<int, SummaryRow>> rows;
  for (int k = 0; k < 8; ++k) rows.emplace_back(k, serial.runs[k]);
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto again = aggregate_replications(rows);
    for (std::size_t c = 0; c < serial.columns.size(); ++c) {
      REQUIRE(again.columns[c].mean == serial.columns[c].mean);
      REQUIRE(again.columns[c].variance == serial.columns[c].variance);
    }
  }
}

TEST_CASE("spread of replication means shrinks like one over the group size") {
  const int total = 96;
  const auto agg = run_replications(small_switch(64, 20000), total, 0);
  std::vector<double> lat;
  for (const auto& r : agg.runs) lat.push_back(r.latency_mean);
  const auto variance_of_group_means = [&](int size) {
    std::vector<double> means;
    for (int g = 0; g + size <= total; g += size) {
      double s = 0;
      for (int k = g; k < g + size; ++k) s += lat[k];
      means.push_back(s / size);
    }
    double mu = 0;
    for (double x : means) mu += x;
    mu /= static_cast<double>(means.size());
    double ss = 0;
    for (double x : means) ss += (x - mu) * (x - mu);
    return ss / static_cast<double>(means.size() - 1);
  };
  const double v1 = variance_of_group_means(1);
  const double v8 = variance_of_group_means(8);
  CHECK(v1 > 0);
  const double ratio = v1 / v8;
  MESSAGE("variance ratio for groups of 8: " << ratio);
  CHECK(ratio > 3.0);
  CHECK(ratio < 24.0);
}

TEST_CASE("sweeps cover the grid in order") {
  auto base = small_switch(65, 20000);
  const auto rows = run_sweep(base, {0.2, 0.6}, {SchedulerKind::Mucf, SchedulerKind::Lqf}, 2, 2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rho == 0.2);
  CHECK(rows[3].rho == 0.6);
  CHECK(rows[0].scheduler != rows[1].scheduler);
  for (const auto& r : rows) CHECK(r.stable_runs == 2);
}

TEST_CASE("scheduler names") {
  CHECK(parse_scheduler_kind("lqf") == SchedulerKind::Lqf);
  CHECK_THROWS(parse_scheduler_kind("fastest"));
}

TEST_CASE("debug runs with invariant checks pass on every topology kind") {
  const char* docs[] = {
      R"({"topology": {"kind": "switch", "ports": 3}, "rates": {"uniform": 0.9},
          "horizon": 3000, "check_invariants": true})",
      R"({"topology": {"kind": "conflict_graph", "nodes": 5,
                       "edges": [[0,1],[1,2],[2,3],[3,4],[4,0],[0,2]]},
          "rates": {"vector": [0.15, 0.15, 0.15, 0.2, 0.2]},
          "horizon": 3000, "check_invariants": true})",
      R"({"topology": {"kind": "explicit", "queues": 4,
                       "schedules": [[1,1,0,0],[0,0,1,1],[1,0,1,0],[0,1,0,1]]},
          "rates": {"vector": [0.2, 0.2, 0.2, 0.2]},
          "horizon": 3000, "check_invariants": true})",
  };
  for (const char* doc : docs) {
    const auto cfg = parse_config(doc);
    CHECK(cfg.admissibility.admissible);
    CHECK_NOTHROW(run_experiment(cfg));
  }
}

#include "mucf/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace mucf {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

int TopologySpec::n_queues() const {
  switch (kind) {
    case ScheduleKind::Switch:
      return ports * ports;
    case ScheduleKind::ConflictGraph:
      return nodes;
    case ScheduleKind::Explicit:
      return queues;
  }
  return 0;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw ConfigError(field, message);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) fail(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where + "." + key, "required field is missing");
  return *it;
}

std::int64_t as_int(const json& v, const std::string& field, std::int64_t lo,
                    std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
  if (!v.is_number_integer()) fail(field, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) {
    fail(field, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
  return x;
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(field, "expected a finite number");
  return x;
}

double as_rate(const json& v, const std::string& field) {
  const double x = as_number(v, field);
  if (x < 0.0 || x > 1.0) {
    std::ostringstream msg;
    msg << "rate " << x << " outside [0, 1]";
    fail(field, msg.str());
  }
  return x;
}

bool as_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) fail(field, "expected true or false");
  return v.get<bool>();
}

std::string kind_of(const json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object()) {
    const json& k = require(v, "kind", field);
    if (!k.is_string()) fail(field + ".kind", "expected a string");
    return k.get<std::string>();
  }
  fail(field, "expected a string or an object with a kind");
}

std::vector<int> int_list(const json& v, const std::string& field, int lo) {
  if (!v.is_array()) fail(field, "expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<int>(
        as_int(v[i], field + "[" + std::to_string(i) + "]", lo, std::numeric_limits<int>::max())));
  }
  return out;
}

std::vector<double> number_list(const json& v, const std::string& field) {
  if (!v.is_array()) fail(field, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

TopologySpec parse_topology(const json& t) {
  if (!t.is_object()) fail("topology", "expected an object");
  const std::string kind = kind_of(t, "topology");
  TopologySpec topo;
  if (kind == "switch") {
    reject_unknown(t, "topology", {"kind", "ports"});
    topo.kind = ScheduleKind::Switch;
    topo.ports = static_cast<int>(as_int(require(t, "ports", "topology"), "topology.ports", 1, 64));
  } else if (kind == "conflict_graph") {
    reject_unknown(t, "topology", {"kind", "nodes", "edges", "outputs"});
    topo.kind = ScheduleKind::ConflictGraph;
    topo.nodes = static_cast<int>(as_int(require(t, "nodes", "topology"), "topology.nodes", 1, 1024));
    const json& edges = require(t, "edges", "topology");
    if (!edges.is_array()) fail("topology.edges", "expected an array of [u, v] pairs");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string f = "topology.edges[" + std::to_string(i) + "]";
      if (!edges[i].is_array() || edges[i].size() != 2) fail(f, "expected a pair [u, v]");
      const auto u = as_int(edges[i][0], f + "[0]", 0, topo.nodes - 1);
      const auto v = as_int(edges[i][1], f + "[1]", 0, topo.nodes - 1);
      if (u == v) fail(f, "self-loop");
      topo.edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
  } else if (kind == "explicit") {
    reject_unknown(t, "topology", {"kind", "queues", "schedules", "outputs"});
    topo.kind = ScheduleKind::Explicit;
    topo.queues = static_cast<int>(as_int(require(t, "queues", "topology"), "topology.queues", 1, 1024));
    const json& list = require(t, "schedules", "topology");
    if (!list.is_array() || list.empty()) fail("topology.schedules", "expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string f = "topology.schedules[" + std::to_string(i) + "]";
      const auto bits = int_list(list[i], f, 0);
      if (static_cast<int>(bits.size()) != topo.queues) fail(f, "length differs from queues");
      std::vector<std::uint8_t> row;
      for (int b : bits) {
        if (b > 1) fail(f, "entries must be 0 or 1");
        row.push_back(static_cast<std::uint8_t>(b));
      }
      topo.schedules.push_back(std::move(row));
    }
  } else {
    fail("topology.kind", "unknown topology '" + kind + "' (switch, conflict_graph, explicit)");
  }
  if (const auto it = t.find("outputs"); it != t.end()) {
    topo.outputs = int_list(*it, "topology.outputs", 0);
    if (static_cast<int>(topo.outputs.size()) != topo.n_queues()) {
      fail("topology.outputs", "needs one output index per queue");
    }
  }
  return topo;
}

std::vector<double> parse_rates(const json& r, const TopologySpec& topo, std::optional<double>& rho) {
  if (!r.is_object()) fail("rates", "expected an object");
  reject_unknown(r, "rates", {"uniform", "matrix", "vector"});
  if (r.size() != 1) fail("rates", "give exactly one of uniform, matrix, vector");
  const int n = topo.n_queues();
  if (const auto it = r.find("uniform"); it != r.end()) {
    rho = as_rate(*it, "rates.uniform");
    return uniform_rates(topo, *rho);
  }
  if (const auto it = r.find("matrix"); it != r.end()) {
    if (topo.kind != ScheduleKind::Switch) fail("rates.matrix", "only valid for a switch topology");
    const int m = topo.ports;
    if (!it->is_array() || static_cast<int>(it->size()) != m) {
      fail("rates.matrix", "expected " + std::to_string(m) + " rows");
    }
    std::vector<double> out;
    for (int i = 0; i < m; ++i) {
      const json& row = (*it)[i];
      const std::string f = "rates.matrix[" + std::to_string(i) + "]";
      if (!row.is_array() || static_cast<int>(row.size()) != m) {
        fail(f, "expected " + std::to_string(m) + " entries");
      }
      for (int j = 0; j < m; ++j) out.push_back(as_rate(row[j], f + "[" + std::to_string(j) + "]"));
    }
    return out;
  }
  const json& v = r.at("vector");
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    fail("rates.vector", "expected " + std::to_string(n) + " entries");
  }
  std::vector<double> out;
  for (int k = 0; k < n; ++k) out.push_back(as_rate(v[k], "rates.vector[" + std::to_string(k) + "]"));
  return out;
}

WeightFunction parse_weight_function(const json& w) {
  const std::string kind = kind_of(w, "weight_function");
  try {
    if (kind == "identity") {
      if (w.is_object()) reject_unknown(w, "weight_function", {"kind"});
      return WeightFunction::identity();
    }
    if (!w.is_object()) fail("weight_function", "'" + kind + "' needs parameters");
    if (kind == "linear") {
      reject_unknown(w, "weight_function", {"kind", "slope", "rho"});
      const double slope = as_number(require(w, "slope", "weight_function"), "weight_function.slope");
      const double rho = w.contains("rho") ? as_number(w["rho"], "weight_function.rho") : 0.0;
      return WeightFunction::linear(slope, rho);
    }
    if (kind == "piecewise_linear") {
      reject_unknown(w, "weight_function", {"kind", "breakpoints", "slopes", "rho"});
      auto bps = number_list(require(w, "breakpoints", "weight_function"), "weight_function.breakpoints");
      auto slopes = number_list(require(w, "slopes", "weight_function"), "weight_function.slopes");
      const double rho = w.contains("rho") ? as_number(w["rho"], "weight_function.rho") : 0.0;
      return WeightFunction::piecewise(std::move(bps), std::move(slopes), rho);
    }
  } catch (const std::invalid_argument& e) {
    fail("weight_function", e.what());
  }
  fail("weight_function.kind", "unknown weight function '" + kind + "'");
}

SchedulerSpec parse_scheduler(const json& s) {
  SchedulerSpec spec;
  const std::string kind = kind_of(s, "scheduler");
  try {
    spec.kind = parse_scheduler_kind(kind);
  } catch (const std::invalid_argument& e) {
    fail("scheduler.kind", e.what());
  }
  if (s.is_object()) {
    reject_unknown(s, "scheduler", {"kind", "tie_break"});
    if (const auto it = s.find("tie_break"); it != s.end()) {
      const std::string tb = it->is_string() ? it->get<std::string>() : "";
      if (tb == "lex") {
        spec.tie_break = TieBreak::DeterministicLex;
      } else if (tb == "random") {
        spec.tie_break = TieBreak::SeededRandom;
      } else {
        fail("scheduler.tie_break", "expected \"lex\" or \"random\"");
      }
    }
  }
  return spec;
}

ShadowPolicy parse_shadow(const json& p, int n_queues) {
  const std::string kind = kind_of(p, "shadow_policy");
  if (kind == "fifo") return ShadowPolicy::fifo();
  if (kind == "lifo") return ShadowPolicy::lifo();
  if (kind == "round_robin") return ShadowPolicy::round_robin();
  if (kind == "strict_priority") {
    if (!p.is_object()) fail("shadow_policy", "strict_priority needs a classes list");
    reject_unknown(p, "shadow_policy", {"kind", "classes"});
    auto classes = int_list(require(p, "classes", "shadow_policy"), "shadow_policy.classes", 0);
    if (static_cast<int>(classes.size()) != n_queues) {
      fail("shadow_policy.classes", "needs one class per queue");
    }
    return ShadowPolicy::strict_priority(std::move(classes));
  }
  fail("shadow_policy.kind",
       "unknown shadow policy '" + kind + "' (fifo, lifo, round_robin, strict_priority)");
}

OutputPolicy parse_output_policy(const json& p, int n_queues, std::vector<int>& priorities) {
  const std::string kind = kind_of(p, "output_policy");
  if (kind == "fifo") return OutputPolicy::Fifo;
  if (kind == "shadow_departure_order") return OutputPolicy::ShadowDepartureOrder;
  if (kind == "strict_priority") {
    if (!p.is_object()) fail("output_policy", "strict_priority needs a priorities list");
    reject_unknown(p, "output_policy", {"kind", "priorities"});
    priorities = int_list(require(p, "priorities", "output_policy"), "output_policy.priorities", 0);
    if (static_cast<int>(priorities.size()) != n_queues) {
      fail("output_policy.priorities", "needs one level per queue");
    }
    return OutputPolicy::StrictPriority;
  }
  fail("output_policy.kind", "unknown output policy '" + kind + "'");
}

}  // namespace

SchedulerKind parse_scheduler_kind(std::string_view name) {
  if (name == "mucf") return SchedulerKind::Mucf;
  if (name == "lqf") return SchedulerKind::Lqf;
  if (name == "ocf") return SchedulerKind::Ocf;
  if (name == "random_maximal") return SchedulerKind::RandomMaximal;
  throw std::invalid_argument("unknown scheduler '" + std::string(name) +
                              "' (mucf, lqf, ocf, random_maximal)");
}

std::vector<double> uniform_rates(const TopologySpec& topology, double rho) {
  const int n = topology.n_queues();
  const double per_queue =
      topology.kind == ScheduleKind::Switch ? rho / topology.ports : rho / static_cast<double>(n);
  return std::vector<double>(static_cast<std::size_t>(n), per_queue);
}

std::shared_ptr<const ScheduleSet> build_schedule_set(const TopologySpec& topology) {
  switch (topology.kind) {
    case ScheduleKind::Switch:
      return std::make_shared<const ScheduleSet>(ScheduleSet::make_switch(topology.ports));
    case ScheduleKind::ConflictGraph:
      return std::make_shared<const ScheduleSet>(
          ScheduleSet::make_conflict_graph(topology.nodes, topology.edges));
    case ScheduleKind::Explicit: {
      std::vector<FeasibleSchedule> list;
      for (const auto& bits : topology.schedules) list.push_back(FeasibleSchedule{bits});
      return std::make_shared<const ScheduleSet>(
          ScheduleSet::make_explicit(topology.queues, std::move(list)));
    }
  }
  throw std::logic_error("build_schedule_set: unknown topology kind");
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("<document>", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("<document>", "expected a JSON object");
  reject_unknown(doc, "",
                 {"name", "topology", "rates", "scheduler", "weight_function", "shadow_policy",
                  "output_policy", "horizon", "warmup", "seed", "checkpoints", "output_dir",
                  "record_packets", "check_invariants", "lyapunov_per_slot"});

  ExperimentConfig cfg;
  if (const auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) fail("name", "expected a string");
    cfg.name = it->get<std::string>();
  }
  if (!doc.contains("topology")) fail("topology", "required field is missing");
  cfg.topology = parse_topology(doc["topology"]);
  const int n = cfg.topology.n_queues();
  if (!doc.contains("rates")) fail("rates", "required field is missing");
  cfg.lambda = parse_rates(doc["rates"], cfg.topology, cfg.rho);

  if (const auto it = doc.find("scheduler"); it != doc.end()) cfg.scheduler = parse_scheduler(*it);
  if (const auto it = doc.find("weight_function"); it != doc.end()) {
    cfg.scheduler.f = parse_weight_function(*it);
  }
  if (const auto it = doc.find("shadow_policy"); it != doc.end()) cfg.shadow = parse_shadow(*it, n);
  cfg.output_policy = cfg.scheduler.kind == SchedulerKind::Mucf ? OutputPolicy::ShadowDepartureOrder
                                                               : OutputPolicy::Fifo;
  if (const auto it = doc.find("output_policy"); it != doc.end()) {
    cfg.output_policy = parse_output_policy(*it, n, cfg.output_priority);
  }

  if (const auto it = doc.find("horizon"); it != doc.end()) cfg.horizon = as_int(*it, "horizon", 1);
  if (const auto it = doc.find("warmup"); it != doc.end()) cfg.warmup = as_int(*it, "warmup", 0);
  if (!doc.contains("warmup")) cfg.warmup = std::min(cfg.warmup, cfg.horizon / 10);
  if (cfg.warmup >= cfg.horizon) fail("warmup", "must be smaller than horizon");
  if (const auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) fail("seed", "expected a non-negative integer");
    cfg.seed = it->get<std::uint64_t>();
  }

  if (const auto it = doc.find("checkpoints"); it != doc.end()) {
    if (it->is_array()) {
      for (std::size_t i = 0; i < it->size(); ++i) {
        cfg.checkpoints.push_back(
            as_int((*it)[i], "checkpoints[" + std::to_string(i) + "]", 1, cfg.horizon));
      }
      std::sort(cfg.checkpoints.begin(), cfg.checkpoints.end());
      cfg.checkpoints.erase(std::unique(cfg.checkpoints.begin(), cfg.checkpoints.end()),
                            cfg.checkpoints.end());
    } else if (it->is_object()) {
      reject_unknown(*it, "checkpoints", {"ratio"});
      const double ratio = as_number(require(*it, "ratio", "checkpoints"), "checkpoints.ratio");
      if (!(ratio > 1.0)) fail("checkpoints.ratio", "must exceed 1");
      cfg.checkpoints = geometric_checkpoints(cfg.horizon, ratio);
    } else {
      fail("checkpoints", "expected an array of slots or {\"ratio\": r}");
    }
  } else {
    cfg.checkpoints = geometric_checkpoints(cfg.horizon);
  }

  if (const auto it = doc.find("output_dir"); it != doc.end()) {
    if (!it->is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = it->get<std::string>();
  }
  if (const auto it = doc.find("record_packets"); it != doc.end()) {
    cfg.record_packets = as_bool(*it, "record_packets");
  }
  if (const auto it = doc.find("check_invariants"); it != doc.end()) {
    cfg.check_invariants = as_bool(*it, "check_invariants");
  }
  if (const auto it = doc.find("lyapunov_per_slot"); it != doc.end()) {
    cfg.lyapunov_per_slot = as_bool(*it, "lyapunov_per_slot");
  }

  // Build the schedule set now so structural problems surface as config errors.
  std::shared_ptr<const ScheduleSet> set;
  try {
    set = build_schedule_set(cfg.topology);
    // A listed explicit set stands for its monotone closure, so only
    // coverage can be violated.
    if (cfg.topology.kind == ScheduleKind::Explicit) {
      const auto report = set->validate();
      if (!report.covering) {
        std::string msg = "some queue is never served:";
        for (int n : report.uncovered_queues) msg += " " + std::to_string(n);
        fail("topology.schedules", msg);
      }
    }
    cfg.admissibility = check_admissibility(*set, cfg.lambda);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail("topology", e.what());
  }
  if (!cfg.admissibility.admissible) {
    std::ostringstream msg;
    msg << "rates are not strictly admissible (slack " << cfg.admissibility.slack
        << "); some queues will be unstable";
    cfg.warnings.push_back(msg.str());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("<file>", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

NetworkConfig network_config(const ExperimentConfig& cfg, std::shared_ptr<const ScheduleSet> set) {
  NetworkConfig nc;
  nc.schedules = std::move(set);
  nc.output_of = cfg.topology.outputs;
  nc.output_policy = cfg.output_policy;
  nc.priority_of_source = cfg.output_priority;
  nc.check_invariants = cfg.check_invariants;
  return nc;
}

SchedulerSpec scheduler_spec(const ExperimentConfig& cfg) {
  SchedulerSpec spec = cfg.scheduler;
  spec.tie_seed = derive_seed(cfg.seed, 2);
  return spec;
}

int output_count(const std::vector<int>& output_of) {
  int m = 0;
  for (int o : output_of) m = std::max(m, o + 1);
  return m;
}

}  // namespace

Simulation::Simulation(const ExperimentConfig& config)
    : config_(config),
      set_(build_schedule_set(config.topology)),
      network_(network_config(config, set_)),
      shadow_(output_count(network_.output_map()), network_.n_queues(), config.shadow,
              config.check_invariants),
      scheduler_(scheduler_spec(config), set_, config.check_invariants),
      arrivals_(config.lambda, derive_seed(config.seed, 1)) {
  if (static_cast<int>(config_.lambda.size()) != network_.n_queues()) {
    throw std::invalid_argument("Simulation: rate vector length does not match the topology");
  }
  metrics_.lambda = config_.lambda;
  metrics_.warmup = config_.warmup;
  metrics_.departures.assign(config_.lambda.size(), 0);
  metrics_.arrivals.assign(config_.lambda.size(), 0);
  if (config_.lyapunov_per_slot) {
    metrics_.slot_abs_wait.reserve(static_cast<std::size_t>(config_.horizon) + 1);
    metrics_.slot_lyapunov.reserve(static_cast<std::size_t>(config_.horizon) + 1);
  }
}

void Simulation::observe_state() {
  urgencies_ = compute_urgencies(network_, shadow_, tau_, config_.scheduler.f);
  if (config_.check_invariants) check_state();
  const bool at_checkpoint = next_checkpoint_ < config_.checkpoints.size() &&
                             config_.checkpoints[next_checkpoint_] == tau_;
  if (!at_checkpoint && !config_.lyapunov_per_slot) return;
  const LyapunovSample s =
      lyapunov_probe(network_, urgencies_, config_.lambda, config_.scheduler.f, tau_);
  if (config_.lyapunov_per_slot) {
    metrics_.slot_abs_wait.push_back(s.abs_wait);
    metrics_.slot_lyapunov.push_back(s.lyapunov);
  }
  if (at_checkpoint) {
    TimeSeriesRow row;
    row.tau = tau_;
    row.lyapunov = s.lyapunov;
    row.abs_wait = s.abs_wait;
    row.abs_delta = s.abs_delta;
    for (int m = 0; m < shadow_.n_outputs(); ++m) row.theta.push_back(shadow_.theta(m));
    metrics_.series.push_back(std::move(row));
    ++next_checkpoint_;
  }
}

void Simulation::check_state() const {
  const auto& u = urgencies_;
  std::int64_t min_busy = std::numeric_limits<std::int64_t>::max();
  for (int n = 0; n < network_.n_queues(); ++n) {
    if (!u.empty[n]) min_busy = std::min(min_busy, u.raw[n]);
    if (u.delta(n) < 0) {
      throw std::logic_error("negative urgency gap at slot " + std::to_string(tau_) + " queue " +
                             std::to_string(n));
    }
    const auto& q = network_.queue(n);
    if (q.cumulative_departures > q.cumulative_arrivals) {
      throw std::logic_error("departures exceed arrivals at queue " + std::to_string(n));
    }
  }
  for (int n = 0; n < network_.n_queues(); ++n) {
    if (!u.empty[n]) continue;
    if (u.raw[n] > 0 || (min_busy != std::numeric_limits<std::int64_t>::max() && u.raw[n] > min_busy)) {
      throw std::logic_error("empty-queue urgency exceeds a non-empty one at slot " +
                             std::to_string(tau_));
    }
  }
}

void Simulation::record_departure(const Packet& p) {
  const Slot real = *p.real_departure;
  if (config_.check_invariants && real <= p.arrival_slot) {
    throw std::logic_error("packet departed no later than it arrived");
  }
  PacketRecord rec;
  rec.id = p.id;
  rec.queue = p.source_queue;
  rec.output = p.dest_output;
  rec.arrival = p.arrival_slot;
  rec.real_departure = real;
  if (real >= config_.warmup) metrics_.latency.add(static_cast<double>(rec.latency()));
  if (const auto shadow = shadow_.departed_at(p.id)) {
    rec.shadow_departure = *shadow;
    ++metrics_.completed_packets;
    if (real >= config_.warmup) metrics_.oq_delay.add(static_cast<double>(rec.oq_delay()));
    if (config_.record_packets) metrics_.packets.push_back(rec);
  } else {
    awaiting_shadow_.emplace(p.id, rec);
  }
}

void Simulation::resolve_shadow(const std::vector<std::pair<PacketId, Slot>>& departures) {
  if (awaiting_shadow_.empty()) return;
  for (const auto& [id, slot] : departures) {
    const auto it = awaiting_shadow_.find(id);
    if (it == awaiting_shadow_.end()) continue;
    PacketRecord rec = it->second;
    awaiting_shadow_.erase(it);
    rec.shadow_departure = slot;
    ++metrics_.completed_packets;
    if (rec.real_departure >= config_.warmup) {
      metrics_.oq_delay.add(static_cast<double>(rec.oq_delay()));
    }
    if (config_.record_packets) metrics_.packets.push_back(rec);
  }
}

void Simulation::step() {
  if (finished_) throw std::logic_error("Simulation: step after finish");
  if (done()) throw std::logic_error("Simulation: horizon reached");
  observe_state();
  last_schedule_ = scheduler_.select(network_, urgencies_, tau_);
  arrivals_.sample_into(tau_, arrival_buffer_);

  const ShadowCFN& cfn = shadow_;
  const auto lookup = [&cfn](const Packet& p) { return cfn.departure_time(p.id); };
  SlotEvents events = network_.advance_slot(last_schedule_, arrival_buffer_, lookup);

  for (const Packet& p : events.departed) record_departure(p);
  const auto shadow_departures = shadow_.serve(tau_);
  resolve_shadow(shadow_departures);
  shadow_.ingest(events.arrived);
  ++tau_;
}

void Simulation::run() {
  while (!done()) step();
}

RunMetrics Simulation::finish() {
  if (finished_) throw std::logic_error("Simulation: finish called twice");
  observe_state();  // sample the state after the last slot
  finished_ = true;
  metrics_.slots = tau_;
  for (int n = 0; n < network_.n_queues(); ++n) {
    metrics_.departures[n] = network_.queue(n).cumulative_departures;
    metrics_.arrivals[n] = network_.queue(n).cumulative_arrivals;
  }
  if (config_.record_packets) {
    std::sort(metrics_.packets.begin(), metrics_.packets.end(),
              [](const PacketRecord& a, const PacketRecord& b) { return a.id < b.id; });
  }
  return std::move(metrics_);
}

// ---------------------------------------------------------------------------
// Reports

SummaryRow summarize_run(const ExperimentConfig& config, const RunMetrics& metrics) {
  SummaryRow row;
  row.name = config.name;
  row.scheduler = to_string(config.scheduler.kind);
  row.rho = config.rho.value_or(std::numeric_limits<double>::quiet_NaN());
  row.seed = config.seed;
  row.slots = metrics.slots;
  row.warmup = metrics.warmup;
  row.samples = metrics.latency.count();
  row.latency_mean = metrics.latency.mean();
  row.latency_second = metrics.latency.second_moment();
  row.oq_delay_mean = metrics.oq_delay.mean();
  row.oq_delay_second = metrics.oq_delay.second_moment();
  if (metrics.slots > 0) {
    const auto report = rate_stability_report(metrics, metrics.lambda, metrics.slots);
    row.max_deviation_nominal = report.max_deviation_nominal;
    row.max_deviation_empirical = report.max_deviation_empirical;
    row.stable = report.stable();
  }
  return row;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& dir, const char* file) {
  std::ofstream out(dir / file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
  return out;
}

void put(std::ostream& out, double x) {
  if (std::isnan(x)) {
    out << "nan";
  } else {
    out << std::setprecision(12) << x;
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  Simulation sim(config);
  sim.run();
  std::ostringstream shadow_log;
  if (!config.output_dir.empty() && config.record_packets) {
    sim.shadow().write_departure_log(shadow_log);
  }
  RunResult result;
  result.metrics = sim.finish();
  result.summary = summarize_run(config, result.metrics);

  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    {
      auto out = open_csv(dir, "packets.csv");
      write_packets_csv(out, result.metrics);
    }
    {
      auto out = open_csv(dir, "timeseries.csv");
      write_timeseries_csv(out, result.metrics);
    }
    {
      auto out = open_csv(dir, "summary.csv");
      write_summary_csv(out, {result.summary});
    }
    if (config.record_packets) {
      auto out = open_csv(dir, "shadow_log.csv");
      out << shadow_log.str();
    }
  }
  return result;
}

void write_packets_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "packet_id,queue,output,arrival,shadow_departure,real_departure\n";
  for (const auto& p : metrics.packets) {
    out << p.id << ',' << p.queue << ',' << p.output << ',' << p.arrival << ','
        << p.shadow_departure << ',' << p.real_departure << '\n';
  }
}

void write_timeseries_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "tau,lyapunov,abs_wait,abs_delta";
  const std::size_t outputs = metrics.series.empty() ? 0 : metrics.series.front().theta.size();
  for (std::size_t m = 0; m < outputs; ++m) out << ",theta_" << m;
  out << '\n';
  for (const auto& row : metrics.series) {
    out << row.tau << ',';
    put(out, row.lyapunov);
    out << ',';
    put(out, row.abs_wait);
    out << ',';
    put(out, row.abs_delta);
    for (auto t : row.theta) out << ',' << t;
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "name,scheduler,rho,seed,slots,warmup,samples,latency_mean,latency_second,"
         "log_latency_mean,log_latency_second,oq_delay_mean,oq_delay_second,"
         "max_deviation_nominal,max_deviation_empirical,stable\n";
  const auto safe_log = [](double x) {
    return x > 0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN();
  };
  for (const auto& r : rows) {
    out << r.name << ',' << r.scheduler << ',';
    put(out, r.rho);
    out << ',' << r.seed << ',' << r.slots << ',' << r.warmup << ',' << r.samples << ',';
    put(out, r.latency_mean);
    out << ',';
    put(out, r.latency_second);
    out << ',';
    put(out, safe_log(r.latency_mean));
    out << ',';
    put(out, safe_log(r.latency_second));
    out << ',';
    put(out, r.oq_delay_mean);
    out << ',';
    put(out, r.oq_delay_second);
    out << ',';
    put(out, r.max_deviation_nominal);
    out << ',';
    put(out, r.max_deviation_empirical);
    out << ',' << (r.stable ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Replications

std::uint64_t replication_seed(std::uint64_t base, int k) {
  return k == 0 ? base : derive_seed(base, 1000 + static_cast<std::uint64_t>(k));
}

ReplicationSummary aggregate_replications(std::vector<std::pair<int, SummaryRow>> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_replications: no rows");
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  ReplicationSummary agg;
  agg.name = rows.front().second.name;
  agg.scheduler = rows.front().second.scheduler;
  agg.rho = rows.front().second.rho;
  for (auto& [k, row] : rows) {
    agg.stable_runs += row.stable ? 1 : 0;
    agg.runs.push_back(std::move(row));
  }
  const std::pair<const char*, double SummaryRow::*> columns[] = {
      {"latency_mean", &SummaryRow::latency_mean},
      {"latency_second", &SummaryRow::latency_second},
      {"oq_delay_mean", &SummaryRow::oq_delay_mean},
      {"oq_delay_second", &SummaryRow::oq_delay_second},
      {"max_deviation_nominal", &SummaryRow::max_deviation_nominal},
      {"max_deviation_empirical", &SummaryRow::max_deviation_empirical},
  };
  const auto n = static_cast<double>(agg.runs.size());
  for (const auto& [label, field] : columns) {
    double sum = 0.0;
    for (const auto& r : agg.runs) sum += r.*field;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : agg.runs) ss += (r.*field - mean) * (r.*field - mean);
    agg.columns.push_back({label, mean, agg.runs.size() > 1 ? ss / (n - 1.0) : 0.0});
  }
  return agg;
}

ReplicationSummary run_replications(const ExperimentConfig& config, int n_reps, int threads) {
  if (n_reps < 1) throw std::invalid_argument("run_replications: need at least one replication");
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n_reps);

  std::vector<std::pair<int, SummaryRow>> rows;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_reps));
  std::mutex mu;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n_reps) return;
        k = next++;
      }
      try {
        ExperimentConfig cfg = config;
        cfg.seed = replication_seed(config.seed, k);
        cfg.output_dir.clear();
        cfg.record_packets = false;
        Simulation sim(cfg);
        sim.run();
        const RunMetrics metrics = sim.finish();
        SummaryRow row = summarize_run(cfg, metrics);
        std::lock_guard<std::mutex> lock(mu);
        rows.emplace_back(k, std::move(row));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (int k = 0; k < n_reps; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      throw std::runtime_error("replication " + std::to_string(k) + " (seed " +
                               std::to_string(replication_seed(config.seed, k)) +
                               ") failed: " + e.what());
    }
  }
  return aggregate_replications(std::move(rows));
}

void write_aggregate_csv(std::ostream& out, const std::vector<ReplicationSummary>& rows) {
  out << "name,scheduler,rho,replications,stable_runs";
  if (!rows.empty()) {
    for (const auto& c : rows.front().columns) out << ',' << c.column << "_mean," << c.column << "_var";
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.name << ',' << r.scheduler << ',';
    put(out, r.rho);
    out << ',' << r.runs.size() << ',' << r.stable_runs;
    for (const auto& c : r.columns) {
      out << ',';
      put(out, c.mean);
      out << ',';
      put(out, c.variance);
    }
    out << '\n';
  }
}

std::vector<ReplicationSummary> run_sweep(const ExperimentConfig& base,
                                          const std::vector<double>& rhos,
                                          const std::vector<SchedulerKind>& schedulers,
                                          int n_reps, int threads) {
  std::vector<ReplicationSummary> out;
  for (double rho : rhos) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("run_sweep: rho outside [0, 1]");
    for (SchedulerKind kind : schedulers) {
      ExperimentConfig cfg = base;
      cfg.rho = rho;
      cfg.lambda = uniform_rates(cfg.topology, rho);
      cfg.scheduler.kind = kind;
      if (cfg.output_policy != OutputPolicy::StrictPriority) {
        cfg.output_policy =
            kind == SchedulerKind::Mucf ? OutputPolicy::ShadowDepartureOrder : OutputPolicy::Fifo;
      }
      out.push_back(run_replications(cfg, n_reps, threads));
    }
  }
  return out;
}

}  // namespace mucf

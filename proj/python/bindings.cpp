#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mucf/analysis.hpp"
#include "mucf/election.hpp"
#include "mucf/experiment.hpp"
#include "mucf/schedulers.hpp"

namespace py = pybind11;
using namespace mucf;

namespace {

py::dict summary_dict(const SummaryRow& r) {
  py::dict d;
  d["name"] = r.name;
  d["scheduler"] = r.scheduler;
  d["rho"] = r.rho;
  d["seed"] = r.seed;
  d["slots"] = r.slots;
  d["warmup"] = r.warmup;
  d["samples"] = r.samples;
  d["latency_mean"] = r.latency_mean;
  d["latency_second"] = r.latency_second;
  d["oq_delay_mean"] = r.oq_delay_mean;
  d["oq_delay_second"] = r.oq_delay_second;
  d["max_deviation_nominal"] = r.max_deviation_nominal;
  d["max_deviation_empirical"] = r.max_deviation_empirical;
  d["stable"] = r.stable;
  return d;
}

ExperimentConfig config_from(const std::string& text, std::optional<std::uint64_t> seed) {
  auto cfg = parse_config(text);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_mucf, m) {
  m.doc() = "Slot-level simulator for urgency-based fair scheduling";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto cfg = parse_config(text);
        py::dict d;
        d["queues"] = cfg.topology.n_queues();
        d["horizon"] = cfg.horizon;
        d["warmup"] = cfg.warmup;
        d["seed"] = cfg.seed;
        d["rates"] = cfg.lambda;
        d["admissible"] = cfg.admissibility.admissible;
        d["slack"] = cfg.admissibility.slack;
        d["warnings"] = cfg.warnings;
        return d;
      },
      py::arg("config_json"));

  m.def(
      "run",
      [](const std::string& text, std::optional<std::uint64_t> seed) {
        const auto cfg = config_from(text, seed);
        RunResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(cfg);
        }
        return summary_dict(result.summary);
      },
      py::arg("config_json"), py::arg("seed") = py::none(),
      "Runs one simulation and returns its summary row.");

  m.def(
      "replicate",
      [](const std::string& text, int reps, int threads, std::optional<std::uint64_t> seed) {
        const auto cfg = config_from(text, seed);
        ReplicationSummary agg;
        {
          py::gil_scoped_release release;
          agg = run_replications(cfg, reps, threads);
        }
        py::list runs;
        for (const auto& r : agg.runs) runs.append(summary_dict(r));
        py::dict columns;
        for (const auto& c : agg.columns) columns[py::str(c.column)] = py::make_tuple(c.mean, c.variance);
        py::dict d;
        d["runs"] = runs;
        d["columns"] = columns;
        d["stable_runs"] = agg.stable_runs;
        return d;
      },
      py::arg("config_json"), py::arg("reps"), py::arg("threads") = 0, py::arg("seed") = py::none());

  m.def(
      "gm_rank",
      [](const std::vector<std::vector<double>>& votes) {
        const int voters = static_cast<int>(votes.size());
        const int cands = voters == 0 ? 0 : static_cast<int>(votes.front().size());
        std::vector<double> flat;
        for (const auto& row : votes) {
          if (static_cast<int>(row.size()) != cands) throw std::invalid_argument("ragged vote matrix");
          flat.insert(flat.end(), row.begin(), row.end());
        }
        const auto r = gm_rank(VoteMatrix(voters, cands, std::move(flat)));
        return py::make_tuple(r.order, r.tie_broken);
      },
      py::arg("votes"), "Returns (order, tie_broken) for a voters x candidates matrix.");

  m.def(
      "max_weight_matching",
      [](const std::vector<std::vector<double>>& w) {
        const int ports = static_cast<int>(w.size());
        std::vector<double> flat;
        for (const auto& row : w) {
          if (static_cast<int>(row.size()) != ports) throw std::invalid_argument("matrix must be square");
          flat.insert(flat.end(), row.begin(), row.end());
        }
        const auto r = solve_max_assignment(ports, flat);
        return py::make_tuple(r.column_of_row, r.value);
      },
      py::arg("weights"), "Returns (column_of_row, value) of a maximum-weight perfect matching.");

  m.def("geometric_checkpoints", &geometric_checkpoints, py::arg("horizon"), py::arg("ratio") = 1.5);
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"));
}

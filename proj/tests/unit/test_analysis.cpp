#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mucf/analysis.hpp"
#include "mucf/experiment.hpp"

using namespace mucf;

namespace {

ExperimentConfig switch_run(int m, double rho, Slot horizon, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.topology.ports = m;
  cfg.lambda.assign(static_cast<std::size_t>(m) * m, rho / m);
  cfg.horizon = horizon;
  cfg.warmup = 0;
  cfg.seed = seed;
  cfg.checkpoints = geometric_checkpoints(horizon);
  return cfg;
}

std::vector<FeasibleSchedule> permutation_matrices(int m) {
  return ScheduleSet::make_switch(m).maximal_schedules();
}

}  // namespace

TEST_CASE("switch admissibility examples") {
  const auto sw2 = ScheduleSet::make_switch(2);
  const std::vector<double> overload{0, 0.6, 0, 0.5};
  const auto bad = check_admissibility(sw2, overload);
  CHECK_FALSE(bad.admissible);
  CHECK(bad.slack == doctest::Approx(-0.1));

  const auto zero = check_admissibility(sw2, std::vector<double>(4, 0.0));
  CHECK(zero.admissible);
  CHECK(zero.slack == 1.0);

  for (int m = 2; m <= 6; ++m) {
    for (double rho : {0.1, 0.5, 0.95}) {
      const std::vector<double> lambda(m * m, rho / m);
      const auto v = check_admissibility(ScheduleSet::make_switch(m), lambda);
      CHECK(v.admissible == (rho < 1.0));
      CHECK(v.slack == doctest::Approx(1 - rho));
      if (v.admissible) CHECK(verify_witness(v, lambda));
    }
  }
  // Full load sits on the boundary. Powers of two keep rho/M exact.
  for (int m : {2, 4, 8}) {
    const auto v = check_admissibility(ScheduleSet::make_switch(m), std::vector<double>(m * m, 1.0 / m));
    CHECK_FALSE(v.admissible);
    CHECK(v.slack == 0.0);
  }
}

TEST_CASE("switch verdicts match the generic linear program on random rates") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int t = 0; t < 200; ++t) {
    const int m = 2 + t % 3;
    std::vector<double> lambda(m * m);
    const double scale = 0.4 + 0.8 * unit(rng);
    for (auto& x : lambda) x = unit(rng);
    // Normalize the largest line sum to `scale`.
    double load = 0;
    for (int i = 0; i < m; ++i) {
      double row = 0, col = 0;
      for (int j = 0; j < m; ++j) {
        row += lambda[i * m + j];
        col += lambda[j * m + i];
      }
      load = std::max({load, row, col});
    }
    for (auto& x : lambda) x *= scale / load;

    const auto direct = check_admissibility(ScheduleSet::make_switch(m), lambda);
    const auto generic =
        check_admissibility(ScheduleSet::make_explicit(m * m, permutation_matrices(m)), lambda);
    REQUIRE(direct.admissible == generic.admissible);
    REQUIRE(direct.slack == doctest::Approx(generic.slack).epsilon(1e-7));
    if (direct.admissible) {
      REQUIRE(verify_witness(direct, lambda));
      REQUIRE(verify_witness(generic, lambda));
    }
  }
}

TEST_CASE("conflict-graph admissibility") {
  const auto tri = ScheduleSet::make_conflict_graph(3, {{0, 1}, {1, 2}, {2, 0}});
  const std::vector<double> light{0.3, 0.3, 0.3}, heavy{0.4, 0.4, 0.4};
  const auto ok = check_admissibility(tri, light);
  CHECK(ok.admissible);
  CHECK(ok.slack == doctest::Approx(0.1));
  CHECK(verify_witness(ok, light));
  CHECK_FALSE(check_admissibility(tri, heavy).admissible);

  const auto path = ScheduleSet::make_conflict_graph(3, {{0, 1}, {1, 2}});
  const std::vector<double> lam{0.5, 0.4, 0.5};
  const auto v = check_admissibility(path, lam);
  CHECK(v.admissible);
  CHECK(v.slack == doctest::Approx(0.1));
}

TEST_CASE("a loaded queue no schedule serves is never admissible") {
  const auto s = ScheduleSet::make_explicit(2, {FeasibleSchedule(std::vector<std::uint8_t>{1, 0})});
  const auto v = check_admissibility(s, std::vector<double>{0.1, 0.1});
  CHECK_FALSE(v.admissible);
  CHECK(std::isinf(v.slack));
}

TEST_CASE("witness check is plain arithmetic") {
  AdmissibilityVerdict v;
  v.alpha = {0.4, 0.5};
  v.schedules = {FeasibleSchedule(std::vector<std::uint8_t>{1, 0}),
                 FeasibleSchedule(std::vector<std::uint8_t>{0, 1})};
  CHECK(verify_witness(v, std::vector<double>{0.4, 0.5}));
  CHECK_FALSE(verify_witness(v, std::vector<double>{0.41, 0.5}));
  v.alpha = {0.5, 0.5};
  CHECK_FALSE(verify_witness(v, std::vector<double>{0.4, 0.5}));
}

TEST_CASE("moment accumulator") {
  MomentAccumulator a;
  for (double x : {1.0, 2.0, 3.0, 4.0}) a.add(x);
  CHECK(a.count() == 4);
  CHECK(a.mean() == 2.5);
  CHECK(a.second_moment() == 7.5);
  CHECK(a.min() == 1);
  CHECK(a.max() == 4);

  MomentAccumulator left, right, whole;
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> d(0, 100);
  for (int k = 0; k < 10000; ++k) {
    const double x = d(rng);
    whole.add(x);
    (k % 3 ? left : right).add(x);
  }
  left.merge(right);
  CHECK(left.count() == whole.count());
  CHECK(left.mean() == doctest::Approx(whole.mean()).epsilon(1e-14));
  CHECK(left.second_moment() == doctest::Approx(whole.second_moment()).epsilon(1e-14));
}

TEST_CASE("compensated sums stay exact where naive sums drift") {
  MomentAccumulator a;
  a.add(1e16);
  for (int k = 0; k < 1000; ++k) a.add(1.0);
  a.add(-1e16);
  CHECK(a.sum() == 1000.0);
}

TEST_CASE("always-served single queue has unit latency") {
  ExperimentConfig cfg;
  cfg.topology.kind = ScheduleKind::Explicit;
  cfg.topology.queues = 1;
  cfg.topology.schedules = {{1}};
  cfg.lambda = {0.5};
  cfg.horizon = 10000;
  cfg.warmup = 0;
  cfg.seed = 53;
  cfg.checkpoints = {cfg.horizon};
  const auto run = run_experiment(cfg);
  const auto report = moment_report(run.metrics);
  CHECK(report.latency.first == 1.0);
  CHECK(report.latency.second == 1.0);
  CHECK(report.latency.log_first == 0.0);
  CHECK(report.oq_delay.first == 0.0);
  CHECK(std::isnan(report.oq_delay.log_first));
  CHECK(report.latency.samples > 4800);
}

TEST_CASE("an empty run has no moments") { CHECK_THROWS_AS(moment_report(RunMetrics{}), std::runtime_error); }

TEST_CASE("rate-stability report") {
  RunMetrics m;
  m.departures = {0, 4990, 3000};
  m.arrivals = {0, 5000, 6000};
  const std::vector<double> lambda{0.0, 0.5, 0.6};
  const auto r = rate_stability_report(m, lambda, 10000, 0.01);
  CHECK(r.rows[0].departure_rate == 0.0);
  CHECK(r.rows[0].deviation_nominal == 0.0);
  CHECK(r.rows[1].deviation_nominal == doctest::Approx(0.001));
  CHECK_FALSE(r.rows[1].flagged);
  CHECK(r.rows[2].flagged);
  CHECK(r.max_deviation_empirical == doctest::Approx(0.3));
  CHECK_FALSE(r.stable());
  CHECK_THROWS_AS(rate_stability_report(m, lambda, 0), std::invalid_argument);
}

TEST_CASE("departures never outrun arrivals and warmup does not touch the trace") {
  auto cfg = switch_run(3, 0.85, 4000, 54);
  cfg.record_packets = true;
  const auto a = run_experiment(cfg).metrics;
  cfg.warmup = 1500;
  const auto b = run_experiment(cfg).metrics;
  REQUIRE(a.packets.size() == b.packets.size());
  for (std::size_t k = 0; k < a.packets.size(); ++k) {
    REQUIRE(a.packets[k].real_departure == b.packets[k].real_departure);
    REQUIRE(a.packets[k].shadow_departure == b.packets[k].shadow_departure);
    REQUIRE(a.packets[k].latency() >= 1);
    REQUIRE(a.packets[k].arrival < a.packets[k].shadow_departure);
  }
  CHECK(a.departures == b.departures);
  CHECK(b.latency.count() < a.latency.count());
  for (std::size_t n = 0; n < a.departures.size(); ++n) CHECK(a.departures[n] <= a.arrivals[n]);
}

TEST_CASE("Lyapunov probe") {
  auto cfg = switch_run(2, 0.9, 3000, 55);
  Simulation sim(cfg);
  const auto f = WeightFunction::identity();
  const auto empty = lyapunov_probe(sim.network(), compute_urgencies(sim.network(), sim.shadow(), 0, f),
                                    cfg.lambda, f, 0);
  CHECK(empty.lyapunov == 0.0);
  while (!sim.done()) {
    sim.step();
    const auto& u = sim.urgencies();
    const auto s = lyapunov_probe(sim.network(), u, cfg.lambda, f, sim.tau());
    double expect = 0, wait = 0;
    for (std::size_t n = 0; n < u.wait.size(); ++n) {
      expect += cfg.lambda[n] * 0.5 * static_cast<double>(u.wait[n] * u.wait[n]);
      wait += static_cast<double>(u.wait[n]);
    }
    REQUIRE(s.lyapunov >= 0);
    REQUIRE(s.lyapunov == doctest::Approx(expect));
    REQUIRE(s.abs_wait == wait);
    REQUIRE(s.abs_delta >= 0);
  }
}

TEST_CASE("binned drift pairs each wait with the next step of L") {
  const std::vector<double> wait{3, 1, 2, 0}, lyap{0, 5, 7, 6};
  const auto bins = binned_drift(wait, lyap, 3);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].mean_drift == 2);
  CHECK(bins[1].mean_drift == -1);
  CHECK(bins[2].mean_drift == 5);
  CHECK(bins[2].wait_lo == 3);

  const auto one = binned_drift(wait, lyap, 1);
  CHECK(one[0].count == 3);
  CHECK(one[0].mean_drift == 2);
  CHECK_THROWS_AS(binned_drift(wait, std::vector<double>{1}, 2), std::invalid_argument);
}

TEST_CASE("log fit and checkpoints") {
  std::vector<double> t, y;
  for (double x = 10; x < 1e6; x *= 3) {
    t.push_back(x);
    y.push_back(2 + 3 * std::log(x));
  }
  const auto fit = fit_against_log(t, y);
  CHECK(fit.slope == doctest::Approx(3));
  CHECK(fit.intercept == doctest::Approx(2));
  CHECK(fit.r_squared == doctest::Approx(1));

  CHECK(geometric_checkpoints(20) == std::vector<Slot>{1, 2, 3, 5, 7, 11, 17, 20});
  CHECK(geometric_checkpoints(17) == std::vector<Slot>{1, 2, 3, 5, 7, 11, 17});
}

TEST_CASE("busy-cycle probe records Theta as checkpoints pass") {
  ShadowCFN cfn(1, 1);
  BusyCycleProbe probe({5, 2, 5, 9});
  CHECK(probe.checkpoints() == std::vector<Slot>{2, 5, 9});
  PacketId id = 0;
  // Two copies at slot 0 and one per slot through slot 3 keep the line busy
  // for slots 1..5.
  for (Slot tau = 0; tau < 10; ++tau) {
    cfn.serve(tau);
    std::vector<Packet> copies;
    for (int k = 0; k < (tau == 0 ? 2 : tau < 4 ? 1 : 0); ++k) {
      Packet p;
      p.id = id++;
      p.arrival_slot = tau;
      copies.push_back(p);
    }
    cfn.ingest(copies);
    probe.observe(cfn, tau + 1);
  }
  REQUIRE(probe.theta().size() == 3);
  CHECK(probe.theta()[0][0] == 1);
  CHECK(probe.theta()[1][0] == 4);
  CHECK(probe.theta()[2][0] == 5);
}

TEST_CASE("busy cycles grow slowly below capacity") {
  const Slot horizon = 100000;
  ShadowCFN cfn(1, 2);
  ArrivalProcess arrivals({0.45, 0.45}, 56);
  const auto checkpoints = geometric_checkpoints(horizon);
  BusyCycleProbe probe(checkpoints);
  PacketId id = 0;
  for (Slot tau = 0; tau < horizon; ++tau) {
    cfn.serve(tau);
    std::vector<Packet> copies;
    const auto a = arrivals.sample(tau);
    for (int q = 0; q < 2; ++q) {
      if (!a[q]) continue;
      Packet p;
      p.id = id++;
      p.arrival_slot = tau;
      p.source_queue = q;
      copies.push_back(p);
    }
    cfn.ingest(copies);
    probe.observe(cfn, tau + 1);
  }
  std::vector<double> t, theta;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    t.push_back(static_cast<double>(checkpoints[k]));
    theta.push_back(static_cast<double>(probe.theta()[k][0]));
  }
  CHECK(fit_against_log(t, theta).slope > 0);
  const auto at = [&](Slot s) {
    const auto k = std::find(checkpoints.begin(), checkpoints.end(), s) - checkpoints.begin();
    return theta[k] / t[k];
  };
  CHECK(at(horizon) < 0.01);
  CHECK(at(horizon) < at(checkpoints[checkpoints.size() / 2]));
}

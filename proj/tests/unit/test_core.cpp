#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <random>
#include <vector>

#include "mucf/core.hpp"

using namespace mucf;

namespace {

std::shared_ptr<const ScheduleSet> explicit_set(int n, std::vector<std::vector<std::uint8_t>> list) {
  std::vector<FeasibleSchedule> s;
  for (auto& b : list) s.emplace_back(std::move(b));
  return std::make_shared<const ScheduleSet>(ScheduleSet::make_explicit(n, std::move(s)));
}

FeasibleSchedule bits(std::vector<std::uint8_t> b) { return FeasibleSchedule(std::move(b)); }

std::vector<std::int64_t> lengths(const Network& net) {
  std::vector<std::int64_t> out;
  for (const auto& q : net.queues()) out.push_back(q.length());
  return out;
}

Packet packet(PacketId id, int source, Slot arrival = 0) {
  Packet p;
  p.id = id;
  p.source_queue = source;
  p.arrival_slot = arrival;
  return p;
}

}  // namespace

TEST_CASE("service of an empty queue is a no-op and is not counted") {
  Network net({explicit_set(2, {{1, 1}})});
  const std::vector<std::uint8_t> one{1, 0}, none{0, 0};
  net.advance_slot(bits({0, 0}), one);
  REQUIRE(lengths(net) == std::vector<std::int64_t>{1, 0});

  net.advance_slot(bits({1, 1}), none);
  CHECK(lengths(net) == std::vector<std::int64_t>{0, 0});
  CHECK(net.queue(0).cumulative_departures == 1);
  CHECK(net.queue(1).cumulative_departures == 0);
}

TEST_CASE("queue recursion with simultaneous service and arrivals") {
  Network net({explicit_set(2, {{1, 1}})});
  net.advance_slot(bits({0, 0}), std::vector<std::uint8_t>{1, 1});
  net.advance_slot(bits({0, 0}), std::vector<std::uint8_t>{1, 0});
  REQUIRE(lengths(net) == std::vector<std::int64_t>{2, 1});

  net.advance_slot(bits({1, 0}), std::vector<std::uint8_t>{1, 1});
  CHECK(lengths(net) == std::vector<std::int64_t>{2, 2});
}

TEST_CASE("a saturated queue that is always served departs tau of tau+1 slots") {
  Network net({explicit_set(1, {{1}})});
  const std::vector<std::uint8_t> arrive{1};
  for (Slot t = 0; t <= 5; ++t) {
    net.advance_slot(bits({1}), arrive);
    // After slot t the queue has delivered every packet that arrived before t.
    CHECK(net.queue(0).cumulative_departures == t);
  }
}

TEST_CASE("infeasible schedules and malformed arrivals are rejected") {
  Network net({std::make_shared<const ScheduleSet>(ScheduleSet::make_switch(2))});
  CHECK_THROWS_AS(net.advance_slot(bits({1, 1, 0, 0}), std::vector<std::uint8_t>(4, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(net.advance_slot(bits({1, 0, 0, 1}), std::vector<std::uint8_t>(3, 0)),
                  std::invalid_argument);
}

TEST_CASE("arrival processes with rates 0 and 1 are deterministic") {
  ArrivalProcess p({0.0, 1.0}, 7);
  for (Slot t = 0; t < 1000; ++t) {
    const auto a = p.sample(t);
    REQUIRE(a[0] == 0);
    REQUIRE(a[1] == 1);
  }
}

TEST_CASE("Bernoulli(0.5) over one million slots with the shipped seed") {
  ArrivalProcess p({0.5}, 20110808);
  std::int64_t total = 0;
  for (Slot t = 0; t < 1000000; ++t) total += p.sample(t)[0];
  const double mean = static_cast<double>(total) / 1e6;
  CHECK(mean >= 0.498);
  CHECK(mean <= 0.502);
  // Golden value for this seed with the libstdc++ bernoulli_distribution.
  CHECK(total == 499810);
}

TEST_CASE("arrival streams repeat for equal seeds and must be sampled in order") {
  ArrivalProcess a({0.3, 0.7, 0.5}, 99), b({0.3, 0.7, 0.5}, 99);
  for (Slot t = 0; t < 5000; ++t) REQUIRE(a.sample(t) == b.sample(t));
  CHECK_THROWS_AS(a.sample(4999), std::logic_error);
  CHECK_THROWS_AS(ArrivalProcess({1.5}, 1), std::invalid_argument);
}

TEST_CASE("output queue ordering policies") {
  SUBCASE("shadow departure order serves the earliest target first") {
    OutputQueue oq(0, OutputPolicy::ShadowDepartureOrder);
    oq.push(packet(1, 0), 0, 5);
    oq.push(packet(2, 1), 0, 3);
    auto p = oq.serve(0);
    REQUIRE(p);
    CHECK(p->id == 2);
    CHECK(p->real_departure == 0);
  }
  SUBCASE("an empty buffer records an idle slot") {
    OutputQueue oq(0, OutputPolicy::Fifo);
    CHECK_FALSE(oq.serve(0).has_value());
    CHECK(oq.busy_cycles().idle_slots() == 1);
  }
  SUBCASE("same-slot FIFO deliveries leave in source order") {
    OutputQueue oq(0, OutputPolicy::Fifo);
    for (int src : {0, 1, 2}) oq.push(packet(10 + src, src), 4);
    for (Slot t = 4; t < 7; ++t) {
      auto p = oq.serve(t);
      REQUIRE(p);
      CHECK(p->source_queue == t - 4);
    }
    CHECK(oq.empty());
  }
  SUBCASE("strict priority by source class") {
    OutputQueue oq(0, OutputPolicy::StrictPriority, {1, 0});
    oq.push(packet(1, 0), 0);
    oq.push(packet(2, 1), 0);
    CHECK(oq.serve(0)->id == 2);
    CHECK(oq.serve(1)->id == 1);
  }
}

TEST_CASE("three deliveries to one line in one slot leave over three slots") {
  // Conflict-free explicit set: all three queues share output 0.
  NetworkConfig cfg{explicit_set(3, {{1, 1, 1}})};
  cfg.output_of = {0, 0, 0};
  Network net(cfg);
  net.advance_slot(bits({0, 0, 0}), std::vector<std::uint8_t>{1, 1, 1});
  std::vector<int> order;
  for (int t = 0; t < 3; ++t) {
    const auto ev = net.advance_slot(bits({t == 0, t == 0, t == 0}), std::vector<std::uint8_t>(3, 0));
    for (const auto& p : ev.departed) order.push_back(p.source_queue);
  }
  CHECK(order == std::vector<int>{0, 1, 2});
}

TEST_CASE("conservation and the queue recursion hold on random traces") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkConfig cfg{std::make_shared<const ScheduleSet>(ScheduleSet::make_switch(3))};
    cfg.check_invariants = true;
    Network net(cfg);
    const auto& smax = net.schedules().maximal_schedules();
    std::bernoulli_distribution coin(0.3);
    std::uniform_int_distribution<std::size_t> pick(0, smax.size() - 1);
    std::vector<std::int64_t> prev_d(9, 0);
    for (Slot t = 0; t < 400; ++t) {
      std::vector<std::uint8_t> a(9);
      for (auto& x : a) x = coin(rng);
      const auto before = lengths(net);
      const auto& pi = smax[pick(rng)];
      net.advance_slot(pi, a);
      for (int n = 0; n < 9; ++n) {
        const auto expected = std::max<std::int64_t>(before[n] - pi.bits[n], 0) + a[n];
        REQUIRE(net.queue(n).length() == expected);
        REQUIRE(net.queue(n).cumulative_departures >= prev_d[n]);
        REQUIRE(net.queue(n).cumulative_departures <= net.queue(n).cumulative_arrivals);
        prev_d[n] = net.queue(n).cumulative_departures;
      }
      REQUIRE(net.total_arrivals() == net.packets_in_constrained_queues() +
                                          net.packets_in_output_queues() + net.total_departed());
    }
  }
}

TEST_CASE("busy-cycle tracker counts the open cycle in Theta") {
  BusyCycleTracker b;
  b.open(0);
  b.record_service(true, false);
  b.record_service(true, true);
  CHECK(b.completed() == std::vector<std::int64_t>{2});
  b.record_service(false, true);
  b.open(3);
  for (int k = 0; k < 3; ++k) b.record_service(true, false);
  CHECK(b.longest() == 3);
  CHECK(b.busy_slots() + b.idle_slots() == 6);
}

TEST_CASE("default routing sends switch queue (i, j) to output j") {
  const auto sw = ScheduleSet::make_switch(3);
  CHECK(default_output_map(sw) == std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2});
  const auto cg = ScheduleSet::make_conflict_graph(3, {{0, 1}});
  CHECK(default_output_map(cg) == std::vector<int>{0, 1, 2});
}

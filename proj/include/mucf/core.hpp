#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mucf/schedules.hpp"
#include "mucf/types.hpp"

namespace mucf {

/// Unit-length cell. Copies sent to the shadow network share the id.
struct Packet {
  PacketId id = 0;
  Slot arrival_slot = 0;
  int source_queue = 0;
  int dest_output = 0;
  std::optional<Slot> shadow_departure;
  std::optional<Slot> real_departure;
};

struct QueueState {
  int index = 0;
  std::deque<Packet> fifo;  // head = oldest
  std::int64_t cumulative_departures = 0;
  std::int64_t cumulative_arrivals = 0;

  std::int64_t length() const { return static_cast<std::int64_t>(fifo.size()); }
  bool empty() const { return fifo.empty(); }
};

/// Independent Bernoulli(lambda_n) arrivals per queue per slot.
///
/// The stream is sequential: sample() must be called once per slot in
/// increasing slot order. Queues with rate 0 or 1 consume no randomness.
class ArrivalProcess {
 public:
  ArrivalProcess(std::vector<double> rates, std::uint64_t seed);

  const std::vector<double>& rates() const { return rates_; }
  std::vector<std::uint8_t> sample(Slot tau);
  void sample_into(Slot tau, std::vector<std::uint8_t>& out);

 private:
  std::vector<double> rates_;
  std::vector<std::bernoulli_distribution> draws_;
  std::mt19937_64 rng_;
  Slot next_slot_ = 0;
};

/// Busy-cycle bookkeeping for a unit-speed work-conserving queue. A cycle is
/// the run of service slots between the queue becoming non-empty and a
/// departure that leaves it empty; an arrival in the same slot starts a new
/// cycle.
class BusyCycleTracker {
 public:
  /// An arrival found the queue empty at the end of slot tau.
  void open(Slot tau);
  /// One service opportunity at slot tau.
  void record_service(bool served, bool empty_after);

  bool is_open() const { return open_; }
  Slot open_since() const { return open_since_; }
  std::int64_t current_length() const { return open_ ? current_ : 0; }
  /// Theta: longest cycle so far, counting the one still open.
  std::int64_t longest() const;
  const std::vector<std::int64_t>& completed() const { return completed_; }
  std::int64_t busy_slots() const { return busy_slots_; }
  std::int64_t idle_slots() const { return idle_slots_; }

 private:
  bool open_ = false;
  Slot open_since_ = -1;
  std::int64_t current_ = 0;
  std::int64_t longest_completed_ = 0;
  std::int64_t busy_slots_ = 0;
  std::int64_t idle_slots_ = 0;
  std::vector<std::int64_t> completed_;
};

enum class OutputPolicy { Fifo, ShadowDepartureOrder, StrictPriority };

/// Unit-speed output line buffer of the real network.
class OutputQueue {
 public:
  OutputQueue(int index, OutputPolicy policy, std::vector<int> priority_of_source = {});

  int index() const { return index_; }
  OutputPolicy policy() const { return policy_; }
  std::size_t size() const { return heap_.size(); }
  bool empty() const { return heap_.empty(); }

  /// Enqueues a packet handed over by a constrained queue at slot tau.
  /// shadow_key is d(p), used only under ShadowDepartureOrder.
  void push(Packet p, Slot tau, Slot shadow_key = 0);
  /// Serves the head per policy and stamps real_departure = tau.
  std::optional<Packet> serve(Slot tau);

  const BusyCycleTracker& busy_cycles() const { return busy_; }

 private:
  struct Entry {
    std::array<std::int64_t, 3> key;
    Packet packet;
  };

  int index_;
  OutputPolicy policy_;
  std::vector<int> priority_of_source_;
  std::vector<Entry> heap_;
  std::int64_t seq_ = 0;
  BusyCycleTracker busy_;
};

std::optional<Packet> serve_output_queue(OutputQueue& oq, Slot tau);

struct NetworkConfig {
  std::shared_ptr<const ScheduleSet> schedules;
  /// Destination output line for each constrained queue. Empty means queue
  /// n feeds line n (or column j for a switch).
  std::vector<int> output_of;
  OutputPolicy output_policy = OutputPolicy::Fifo;
  std::vector<int> priority_of_source;
  bool check_invariants = false;
};

struct SlotEvents {
  Slot tau = 0;
  std::vector<int> served_queues;  // non-empty queues that sent a packet
  std::vector<Packet> departed;    // left the real network this slot
  std::vector<Packet> arrived;     // exogenous arrivals at the end of the slot
};

/// The real constrained network N: FIFO constrained queues feeding output
/// lines. One advance_slot call runs one full slot: service at mid-slot,
/// output-line service in the same slot, arrivals at the end.
class Network {
 public:
  using DepartureLookup = std::function<Slot(const Packet&)>;

  explicit Network(NetworkConfig config);

  Slot tau() const { return clock_.tau; }
  int n_queues() const { return static_cast<int>(queues_.size()); }
  int n_outputs() const { return static_cast<int>(outputs_.size()); }
  const ScheduleSet& schedules() const { return *config_.schedules; }
  const std::vector<QueueState>& queues() const { return queues_; }
  const QueueState& queue(int n) const { return queues_[n]; }
  const std::vector<OutputQueue>& output_queues() const { return outputs_; }
  int output_of(int n) const { return config_.output_of[n]; }
  const std::vector<int>& output_map() const { return config_.output_of; }

  std::int64_t total_arrivals() const { return total_arrivals_; }
  std::int64_t total_departed() const { return total_departed_; }
  std::int64_t packets_in_constrained_queues() const;
  std::int64_t packets_in_output_queues() const;

  /// Throws std::invalid_argument if the schedule is not in S or the
  /// arrival vector has the wrong length. lookup supplies d(p) for the
  /// ShadowDepartureOrder output policy.
  SlotEvents advance_slot(const FeasibleSchedule& schedule, std::span<const std::uint8_t> arrivals,
                          const DepartureLookup& lookup = {});

 private:
  NetworkConfig config_;
  SlotClock clock_;
  std::vector<QueueState> queues_;
  std::vector<OutputQueue> outputs_;
  PacketId next_id_ = 0;
  std::int64_t total_arrivals_ = 0;
  std::int64_t total_departed_ = 0;
};

/// Default routing: switch queue (i, j) -> output j, otherwise n -> n.
std::vector<int> default_output_map(const ScheduleSet& set);

}  // namespace mucf

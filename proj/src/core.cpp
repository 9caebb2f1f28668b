#include "mucf/core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mucf {

namespace {

#ifdef NDEBUG
constexpr bool kDebugBuild = false;
#else
constexpr bool kDebugBuild = true;
#endif

struct KeyGreater {
  template <typename Entry>
  bool operator()(const Entry& a, const Entry& b) const {
    return a.key > b.key;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// ArrivalProcess

ArrivalProcess::ArrivalProcess(std::vector<double> rates, std::uint64_t seed)
    : rates_(std::move(rates)), rng_(seed) {
  draws_.reserve(rates_.size());
  for (double r : rates_) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("arrival rate outside [0, 1]");
    draws_.emplace_back(r);
  }
}

std::vector<std::uint8_t> ArrivalProcess::sample(Slot tau) {
  std::vector<std::uint8_t> out;
  sample_into(tau, out);
  return out;
}

void ArrivalProcess::sample_into(Slot tau, std::vector<std::uint8_t>& out) {
  if (tau != next_slot_) {
    std::ostringstream msg;
    msg << "ArrivalProcess: expected slot " << next_slot_ << ", got " << tau;
    throw std::logic_error(msg.str());
  }
  ++next_slot_;
  out.resize(rates_.size());
  for (std::size_t n = 0; n < rates_.size(); ++n) {
    const double r = rates_[n];
    if (r <= 0.0) {
      out[n] = 0;
    } else if (r >= 1.0) {
      out[n] = 1;
    } else {
      out[n] = draws_[n](rng_) ? 1 : 0;
    }
  }
}

// ---------------------------------------------------------------------------
// BusyCycleTracker

void BusyCycleTracker::open(Slot tau) {
  if (open_) return;
  open_ = true;
  open_since_ = tau;
  current_ = 0;
}

void BusyCycleTracker::record_service(bool served, bool empty_after) {
  if (!served) {
    ++idle_slots_;
    return;
  }
  if (!open_) {
    open_ = true;
    current_ = 0;
  }
  ++current_;
  ++busy_slots_;
  if (empty_after) {
    completed_.push_back(current_);
    longest_completed_ = std::max(longest_completed_, current_);
    open_ = false;
    current_ = 0;
  }
}

std::int64_t BusyCycleTracker::longest() const {
  return std::max(longest_completed_, current_length());
}

// ---------------------------------------------------------------------------
// OutputQueue

OutputQueue::OutputQueue(int index, OutputPolicy policy, std::vector<int> priority_of_source)
    : index_(index), policy_(policy), priority_of_source_(std::move(priority_of_source)) {}

void OutputQueue::push(Packet p, Slot tau, Slot shadow_key) {
  if (heap_.empty()) busy_.open(tau);
  Entry e{{0, 0, 0}, std::move(p)};
  const std::int64_t seq = seq_++;
  switch (policy_) {
    case OutputPolicy::Fifo:
      e.key = {seq, 0, 0};
      break;
    case OutputPolicy::ShadowDepartureOrder:
      e.key = {shadow_key, e.packet.arrival_slot, e.packet.source_queue};
      break;
    case OutputPolicy::StrictPriority: {
      const int src = e.packet.source_queue;
      const int level = src < static_cast<int>(priority_of_source_.size())
                            ? priority_of_source_[src]
                            : 0;
      e.key = {level, seq, 0};
      break;
    }
  }
  heap_.push_back(std::move(e));
  std::push_heap(heap_.begin(), heap_.end(), KeyGreater{});
}

std::optional<Packet> OutputQueue::serve(Slot tau) {
  if (heap_.empty()) {
    busy_.record_service(false, true);
    return std::nullopt;
  }
  std::pop_heap(heap_.begin(), heap_.end(), KeyGreater{});
  Packet p = std::move(heap_.back().packet);
  heap_.pop_back();
  p.real_departure = tau;
  busy_.record_service(true, heap_.empty());
  return p;
}

std::optional<Packet> serve_output_queue(OutputQueue& oq, Slot tau) { return oq.serve(tau); }

// ---------------------------------------------------------------------------
// Network

std::vector<int> default_output_map(const ScheduleSet& set) {
  std::vector<int> out(static_cast<std::size_t>(set.n_queues()));
  if (set.kind() == ScheduleKind::Switch) {
    const int m = set.ports();
    for (int n = 0; n < set.n_queues(); ++n) out[n] = n % m;
  } else {
    std::iota(out.begin(), out.end(), 0);
  }
  return out;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  if (!config_.schedules) throw std::invalid_argument("Network: schedule set is required");
  const int n_queues = config_.schedules->n_queues();
  if (config_.output_of.empty()) config_.output_of = default_output_map(*config_.schedules);
  if (static_cast<int>(config_.output_of.size()) != n_queues) {
    throw std::invalid_argument("Network: output map length does not match queue count");
  }
  int n_outputs = 0;
  for (int m : config_.output_of) {
    if (m < 0) throw std::invalid_argument("Network: negative output index");
    n_outputs = std::max(n_outputs, m + 1);
  }
  queues_.resize(n_queues);
  for (int n = 0; n < n_queues; ++n) queues_[n].index = n;
  outputs_.reserve(n_outputs);
  for (int m = 0; m < n_outputs; ++m) {
    outputs_.emplace_back(m, config_.output_policy, config_.priority_of_source);
  }
}

std::int64_t Network::packets_in_constrained_queues() const {
  std::int64_t total = 0;
  for (const auto& q : queues_) total += q.length();
  return total;
}

std::int64_t Network::packets_in_output_queues() const {
  std::int64_t total = 0;
  for (const auto& oq : outputs_) total += static_cast<std::int64_t>(oq.size());
  return total;
}

SlotEvents Network::advance_slot(const FeasibleSchedule& schedule,
                                 std::span<const std::uint8_t> arrivals,
                                 const DepartureLookup& lookup) {
  const int n_queues = this->n_queues();
  if (static_cast<int>(arrivals.size()) != n_queues) {
    throw std::invalid_argument("advance_slot: arrival vector length does not match N");
  }
  if (!config_.schedules->contains(schedule)) {
    throw std::invalid_argument("advance_slot: schedule is not feasible (scheduler bug)");
  }

  const bool check = config_.check_invariants || kDebugBuild;
  std::vector<std::int64_t> before;
  if (check) {
    before.reserve(n_queues);
    for (const auto& q : queues_) before.push_back(q.length());
  }

  SlotEvents events;
  events.tau = clock_.tau;
  const Slot tau = clock_.tau;

  // Mid-slot: constrained-queue service in ascending queue index, so
  // simultaneous deliveries to one line enter it in source order.
  for (int n = 0; n < n_queues; ++n) {
    if (!schedule.bits[n]) continue;
    QueueState& q = queues_[n];
    if (q.fifo.empty()) continue;
    Packet p = std::move(q.fifo.front());
    q.fifo.pop_front();
    ++q.cumulative_departures;
    events.served_queues.push_back(n);
    const Slot key = (lookup && config_.output_policy == OutputPolicy::ShadowDepartureOrder)
                         ? lookup(p)
                         : Slot{0};
    outputs_[p.dest_output].push(std::move(p), tau, key);
  }

  for (auto& oq : outputs_) {
    if (auto p = oq.serve(tau)) {
      ++total_departed_;
      events.departed.push_back(std::move(*p));
    }
  }

  // End of slot: exogenous arrivals.
  for (int n = 0; n < n_queues; ++n) {
    if (!arrivals[n]) continue;
    if (arrivals[n] > 1) throw std::invalid_argument("advance_slot: arrivals must be 0 or 1");
    Packet p;
    p.id = next_id_++;
    p.arrival_slot = tau;
    p.source_queue = n;
    p.dest_output = config_.output_of[n];
    queues_[n].fifo.push_back(p);
    ++queues_[n].cumulative_arrivals;
    ++total_arrivals_;
    events.arrived.push_back(std::move(p));
  }

  if (check) {
    for (int n = 0; n < n_queues; ++n) {
      const std::int64_t expected =
          std::max<std::int64_t>(before[n] - schedule.bits[n], 0) + arrivals[n];
      if (queues_[n].length() != expected) {
        std::ostringstream msg;
        msg << "queue recursion violated at slot " << tau << " queue " << n << ": expected "
            << expected << ", found " << queues_[n].length();
        throw std::logic_error(msg.str());
      }
    }
    const std::int64_t held = packets_in_constrained_queues() + packets_in_output_queues();
    if (total_arrivals_ != held + total_departed_) {
      throw std::logic_error("packet conservation violated at slot " + std::to_string(tau));
    }
  }

  clock_.tick();
  return events;
}

}  // namespace mucf

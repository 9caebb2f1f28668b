#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mucf/core.hpp"
#include "mucf/types.hpp"

namespace mucf {

enum class ShadowPolicyKind { Fifo, Lifo, StrictPriority, RoundRobin };

/// Single-queue discipline run at every shadow output line. All variants are
/// work-conserving. RoundRobin cycles over source queues in index order.
struct ShadowPolicy {
  ShadowPolicyKind kind = ShadowPolicyKind::Fifo;
  /// StrictPriority only: class level per source queue, 0 = highest.
  std::vector<int> class_of_source;

  static ShadowPolicy fifo() { return {}; }
  static ShadowPolicy lifo() { return {ShadowPolicyKind::Lifo, {}}; }
  static ShadowPolicy round_robin() { return {ShadowPolicyKind::RoundRobin, {}}; }
  static ShadowPolicy strict_priority(std::vector<int> classes) {
    return {ShadowPolicyKind::StrictPriority, std::move(classes)};
  }
};

const char* to_string(ShadowPolicyKind kind);

/// Constraint-free shadow of the real network. Every arrival copy joins its
/// destination line immediately and each line serves one copy per slot.
///
/// Lockstep contract: serve(tau) is called for tau = 0, 1, 2, ... and the
/// copies of slot-tau arrivals are ingested after serve(tau).
///
/// departure_time() is exact once a copy has left. For a copy still queued it
/// is the departure projected under no further arrivals; under FIFO that
/// projection never changes, under the other policies later arrivals may
/// move it.
class ShadowCFN {
 public:
  ShadowCFN(int n_outputs, int n_queues, ShadowPolicy policy = {}, bool check_invariants = false);

  int n_outputs() const { return static_cast<int>(lines_.size()); }
  const ShadowPolicy& policy() const { return policy_; }
  /// Slot of the next serve() call.
  Slot next_service_slot() const { return next_; }

  void ingest(std::span<const Packet> copies);
  std::vector<std::pair<PacketId, Slot>> serve(Slot tau);

  /// Throws std::out_of_range for an id that was never ingested.
  Slot departure_time(PacketId id) const;
  std::optional<Slot> departed_at(PacketId id) const;
  bool knows(PacketId id) const;

  std::size_t backlog(int m) const { return lines_[m].size; }
  std::int64_t ingested(int m) const { return lines_[m].ingested; }
  std::int64_t departed(int m) const { return lines_[m].departed; }
  const BusyCycleTracker& busy_cycles(int m) const { return lines_[m].busy; }
  std::int64_t theta(int m) const { return lines_[m].busy.longest(); }

  /// CSV: packet_id,arrival,shadow_departure (empty when still queued).
  void write_departure_log(std::ostream& out) const;

 private:
  struct Lane {
    std::deque<PacketId> ids;
    std::int64_t pushed = 0;
    std::int64_t popped = 0;
  };

  struct Line {
    std::vector<Lane> lanes;
    std::vector<PacketId> stack;  // LIFO only
    int rr_next = 0;
    std::size_t size = 0;
    std::int64_t ingested = 0;
    std::int64_t departed = 0;
    BusyCycleTracker busy;
  };

  struct Location {
    int output = 0;
    int lane = 0;
    std::int64_t seq = 0;  // lane sequence number, or stack index under LIFO
    Slot projected_at_ingest = 0;
  };

  struct LogEntry {
    Slot arrival = -1;
    Slot departure = -1;
  };

  int lane_of(const Packet& p) const;
  Slot project(const Location& loc) const;
  PacketId pop(Line& line);

  ShadowPolicy policy_;
  int n_queues_;
  bool check_;
  Slot next_ = 0;
  std::vector<Line> lines_;
  std::unordered_map<PacketId, Location> pending_;
  std::vector<LogEntry> log_;
};

/// Free-function aliases mirroring the operation names.
inline void shadow_ingest(ShadowCFN& cfn, std::span<const Packet> copies) { cfn.ingest(copies); }
inline std::vector<std::pair<PacketId, Slot>> shadow_serve(ShadowCFN& cfn, Slot tau) {
  return cfn.serve(tau);
}
inline Slot shadow_departure_time(const ShadowCFN& cfn, PacketId id) {
  return cfn.departure_time(id);
}

}  // namespace mucf

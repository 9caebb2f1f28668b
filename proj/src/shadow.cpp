#include "mucf/shadow.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mucf {

const char* to_string(ShadowPolicyKind kind) {
  switch (kind) {
    case ShadowPolicyKind::Fifo:
      return "fifo";
    case ShadowPolicyKind::Lifo:
      return "lifo";
    case ShadowPolicyKind::StrictPriority:
      return "strict_priority";
    case ShadowPolicyKind::RoundRobin:
      return "round_robin";
  }
  return "?";
}

ShadowCFN::ShadowCFN(int n_outputs, int n_queues, ShadowPolicy policy, bool check_invariants)
    : policy_(std::move(policy)), n_queues_(n_queues), check_(check_invariants) {
  if (n_outputs < 1) throw std::invalid_argument("ShadowCFN: need at least one output line");
  if (n_queues < 1) throw std::invalid_argument("ShadowCFN: need at least one queue");
  std::size_t lanes = 1;
  switch (policy_.kind) {
    case ShadowPolicyKind::Fifo:
    case ShadowPolicyKind::Lifo:
      break;
    case ShadowPolicyKind::StrictPriority: {
      int levels = 1;
      for (int c : policy_.class_of_source) {
        if (c < 0) throw std::invalid_argument("ShadowCFN: negative priority class");
        levels = std::max(levels, c + 1);
      }
      lanes = static_cast<std::size_t>(levels);
      break;
    }
    case ShadowPolicyKind::RoundRobin:
      lanes = static_cast<std::size_t>(n_queues);
      break;
  }
  lines_.resize(n_outputs);
  for (auto& line : lines_) line.lanes.resize(lanes);
}

int ShadowCFN::lane_of(const Packet& p) const {
  switch (policy_.kind) {
    case ShadowPolicyKind::StrictPriority:
      return p.source_queue < static_cast<int>(policy_.class_of_source.size())
                 ? policy_.class_of_source[p.source_queue]
                 : 0;
    case ShadowPolicyKind::RoundRobin:
      return p.source_queue;
    default:
      return 0;
  }
}

void ShadowCFN::ingest(std::span<const Packet> copies) {
  std::vector<const Packet*> ordered;
  ordered.reserve(copies.size());
  for (const auto& p : copies) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(), [](const Packet* a, const Packet* b) {
    return a->source_queue < b->source_queue;
  });

  for (const Packet* p : ordered) {
    if (p->arrival_slot != next_ - 1) {
      std::ostringstream msg;
      msg << "ShadowCFN::ingest: copy " << p->id << " arrived at slot " << p->arrival_slot
          << " but the shadow last served slot " << next_ - 1;
      throw std::logic_error(msg.str());
    }
    if (p->dest_output < 0 || p->dest_output >= n_outputs()) {
      throw std::out_of_range("ShadowCFN::ingest: destination output out of range");
    }
    if (p->source_queue < 0 || p->source_queue >= n_queues_) {
      throw std::out_of_range("ShadowCFN::ingest: source queue out of range");
    }
    if (p->id < log_.size() && log_[p->id].arrival >= 0) {
      throw std::logic_error("ShadowCFN::ingest: duplicate packet id " + std::to_string(p->id));
    }

    Line& line = lines_[p->dest_output];
    if (line.size == 0) line.busy.open(p->arrival_slot);

    Location loc;
    loc.output = p->dest_output;
    loc.lane = lane_of(*p);
    if (policy_.kind == ShadowPolicyKind::Lifo) {
      loc.seq = static_cast<std::int64_t>(line.stack.size());
      line.stack.push_back(p->id);
    } else {
      Lane& lane = line.lanes[loc.lane];
      loc.seq = lane.pushed++;
      lane.ids.push_back(p->id);
    }
    ++line.size;
    ++line.ingested;
    loc.projected_at_ingest = project(loc);
    pending_.emplace(p->id, loc);

    if (p->id >= log_.size()) log_.resize(p->id + 1);
    log_[p->id].arrival = p->arrival_slot;
  }
}

PacketId ShadowCFN::pop(Line& line) {
  PacketId id = 0;
  switch (policy_.kind) {
    case ShadowPolicyKind::Lifo:
      id = line.stack.back();
      line.stack.pop_back();
      break;
    case ShadowPolicyKind::Fifo:
    case ShadowPolicyKind::StrictPriority:
      for (auto& lane : line.lanes) {
        if (lane.ids.empty()) continue;
        id = lane.ids.front();
        lane.ids.pop_front();
        ++lane.popped;
        break;
      }
      break;
    case ShadowPolicyKind::RoundRobin: {
      const int n_lanes = static_cast<int>(line.lanes.size());
      for (int step = 0; step < n_lanes; ++step) {
        const int l = (line.rr_next + step) % n_lanes;
        Lane& lane = line.lanes[l];
        if (lane.ids.empty()) continue;
        id = lane.ids.front();
        lane.ids.pop_front();
        ++lane.popped;
        line.rr_next = (l + 1) % n_lanes;
        break;
      }
      break;
    }
  }
  --line.size;
  return id;
}

std::vector<std::pair<PacketId, Slot>> ShadowCFN::serve(Slot tau) {
  if (tau != next_) {
    std::ostringstream msg;
    msg << "ShadowCFN::serve: expected slot " << next_ << ", got " << tau;
    throw std::logic_error(msg.str());
  }
  std::vector<std::pair<PacketId, Slot>> departures;
  for (auto& line : lines_) {
    if (line.size == 0) {
      line.busy.record_service(false, true);
      continue;
    }
    const std::size_t size_before = line.size;
    const PacketId id = pop(line);
    ++line.departed;
    line.busy.record_service(true, line.size == 0);

    auto it = pending_.find(id);
    if (check_) {
      if (line.size + 1 != size_before) throw std::logic_error("shadow line did not serve");
      if (policy_.kind == ShadowPolicyKind::Fifo && it->second.projected_at_ingest != tau) {
        std::ostringstream msg;
        msg << "FIFO shadow departure of packet " << id << " moved from "
            << it->second.projected_at_ingest << " to " << tau;
        throw std::logic_error(msg.str());
      }
      if (line.ingested != line.departed + static_cast<std::int64_t>(line.size)) {
        throw std::logic_error("shadow conservation violated");
      }
    }
    pending_.erase(it);
    log_[id].departure = tau;
    departures.emplace_back(id, tau);
  }
  if (check_) {
    for (const auto& line : lines_) {
      if (line.busy.busy_slots() + line.busy.idle_slots() != tau + 1) {
        throw std::logic_error("busy-cycle partition violated at slot " + std::to_string(tau));
      }
    }
  }
  ++next_;
  return departures;
}

Slot ShadowCFN::project(const Location& loc) const {
  const Line& line = lines_[loc.output];
  switch (policy_.kind) {
    case ShadowPolicyKind::Fifo:
      return next_ + (loc.seq - line.lanes[0].popped);
    case ShadowPolicyKind::Lifo:
      return next_ + (static_cast<std::int64_t>(line.stack.size()) - 1 - loc.seq);
    case ShadowPolicyKind::StrictPriority: {
      std::int64_t ahead = loc.seq - line.lanes[loc.lane].popped;
      for (int l = 0; l < loc.lane; ++l) {
        ahead += static_cast<std::int64_t>(line.lanes[l].ids.size());
      }
      return next_ + ahead;
    }
    case ShadowPolicyKind::RoundRobin: {
      // With no further arrivals every round visits the non-empty lanes in
      // cyclic order from rr_next. The copy at position k of its lane leaves
      // in round k.
      const int n_lanes = static_cast<int>(line.lanes.size());
      const std::int64_t k = loc.seq - line.lanes[loc.lane].popped;
      const int own_offset = (loc.lane - line.rr_next + n_lanes) % n_lanes;
      std::int64_t ahead = k;
      for (int l = 0; l < n_lanes; ++l) {
        if (l == loc.lane) continue;
        const auto len = static_cast<std::int64_t>(line.lanes[l].ids.size());
        ahead += std::min(len, k);
        const int offset = (l - line.rr_next + n_lanes) % n_lanes;
        if (offset < own_offset && len > k) ++ahead;
      }
      return next_ + ahead;
    }
  }
  return next_;
}

bool ShadowCFN::knows(PacketId id) const { return id < log_.size() && log_[id].arrival >= 0; }

std::optional<Slot> ShadowCFN::departed_at(PacketId id) const {
  if (!knows(id) || log_[id].departure < 0) return std::nullopt;
  return log_[id].departure;
}

Slot ShadowCFN::departure_time(PacketId id) const {
  if (!knows(id)) throw std::out_of_range("ShadowCFN: unknown packet id " + std::to_string(id));
  if (log_[id].departure >= 0) return log_[id].departure;
  return project(pending_.at(id));
}

void ShadowCFN::write_departure_log(std::ostream& out) const {
  out << "packet_id,arrival,shadow_departure\n";
  for (std::size_t id = 0; id < log_.size(); ++id) {
    if (log_[id].arrival < 0) continue;
    out << id << ',' << log_[id].arrival << ',';
    if (log_[id].departure >= 0) out << log_[id].departure;
    out << '\n';
  }
}

}  // namespace mucf

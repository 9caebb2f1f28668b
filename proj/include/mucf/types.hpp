#pragma once

#include <cstdint>

namespace mucf {

/// Discrete time-slot index.
using Slot = std::int64_t;

/// Globally monotone packet identifier, assigned in arrival order.
using PacketId = std::uint64_t;

struct SlotClock {
  Slot tau = 0;

  void tick() { ++tau; }
};

}  // namespace mucf

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mucf/core.hpp"
#include "mucf/election.hpp"
#include "mucf/schedules.hpp"

namespace mucf {

enum class SchedulerKind { Mucf, Lqf, Ocf, RandomMaximal };
enum class TieBreak { DeterministicLex, SeededRandom };

const char* to_string(SchedulerKind kind);

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::Mucf;
  WeightFunction f = WeightFunction::identity();
  TieBreak tie_break = TieBreak::DeterministicLex;
  std::uint64_t tie_seed = 0;
};

using WeightVector = std::vector<double>;

/// MUCF: f(U_n). LQF: Q_n. OCF: head-of-line wait W_n. Empty queues get 0
/// under LQF and OCF. RandomMaximal: all zero.
WeightVector compute_weights(const SchedulerSpec& spec, const Network& state,
                             const UrgencyVector& urgencies, Slot tau);

struct AssignmentResult {
  std::vector<int> column_of_row;
  double value = 0.0;
};

/// Exact maximum-weight perfect matching on an M x M row-major weight
/// matrix (Hungarian method, O(M^3)). Weights may be negative.
///
/// Ties among maximizers are resolved in two stages. When `occupied` is
/// given (one flag per cell), matchings serving more occupied cells win.
/// Remaining ties go to the lexicographically smallest schedule bit-vector,
/// i.e. row 0 takes the largest column it can, then row 1, and so on.
AssignmentResult solve_max_assignment(int ports, std::span<const double> weights,
                                      std::span<const std::uint8_t> occupied = {});

/// Perfect matching maximizing <w, pi> with the requested tie-break.
FeasibleSchedule max_weight_assignment(int ports, std::span<const double> weights,
                                       TieBreak tie = TieBreak::DeterministicLex,
                                       std::mt19937_64* rng = nullptr,
                                       std::span<const std::uint8_t> occupied = {});

/// Argmax over the enumerated S_max. Among maximizers, those serving the
/// most occupied queues are kept (when `occupied` is given); DeterministicLex
/// then returns the smallest bit-vector and SeededRandom a uniform pick.
FeasibleSchedule max_weight_exhaustive(const ScheduleSet& set, std::span<const double> weights,
                                       TieBreak tie = TieBreak::DeterministicLex,
                                       std::mt19937_64* rng = nullptr,
                                       std::span<const std::uint8_t> occupied = {});

/// Flag per queue: 1 when the queue holds a packet.
std::vector<std::uint8_t> occupancy(const Network& state);

/// Stateful per-run scheduler; owns the tie-break stream.
class Scheduler {
 public:
  Scheduler(SchedulerSpec spec, std::shared_ptr<const ScheduleSet> set, bool verify = false);

  const SchedulerSpec& spec() const { return spec_; }
  /// Picks a maximal schedule for slot tau. With verify set, checks
  /// maximality and, for switches with M <= 5, optimality against
  /// enumeration (throws std::logic_error on mismatch).
  FeasibleSchedule select(const Network& state, const UrgencyVector& urgencies, Slot tau);
  const WeightVector& last_weights() const { return weights_; }

 private:
  SchedulerSpec spec_;
  std::shared_ptr<const ScheduleSet> set_;
  bool verify_;
  std::mt19937_64 rng_;
  WeightVector weights_;
  std::vector<std::uint8_t> occupied_;
};

/// Selects the schedule for slot tau. Max-weight kinds prefer schedules that
/// serve more non-empty queues among equal-weight maximizers.
FeasibleSchedule select_schedule(const SchedulerSpec& spec, const Network& state,
                                 const UrgencyVector& urgencies, const ScheduleSet& set, Slot tau,
                                 std::mt19937_64* rng = nullptr);

}  // namespace mucf

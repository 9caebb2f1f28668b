#include "mucf/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mucf {

const char* to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::Mucf:
      return "mucf";
    case SchedulerKind::Lqf:
      return "lqf";
    case SchedulerKind::Ocf:
      return "ocf";
    case SchedulerKind::RandomMaximal:
      return "random_maximal";
  }
  return "?";
}

WeightVector compute_weights(const SchedulerSpec& spec, const Network& state,
                             const UrgencyVector& urgencies, Slot /*tau*/) {
  const int n_queues = state.n_queues();
  WeightVector w(static_cast<std::size_t>(n_queues), 0.0);
  switch (spec.kind) {
    case SchedulerKind::Mucf:
      if (static_cast<int>(urgencies.weighted.size()) != n_queues) {
        throw std::invalid_argument("compute_weights: urgency vector has wrong length");
      }
      w = urgencies.weighted;
      break;
    case SchedulerKind::Lqf:
      for (int n = 0; n < n_queues; ++n) w[n] = static_cast<double>(state.queue(n).length());
      break;
    case SchedulerKind::Ocf:
      if (static_cast<int>(urgencies.wait.size()) != n_queues) {
        throw std::invalid_argument("compute_weights: waiting-time vector has wrong length");
      }
      for (int n = 0; n < n_queues; ++n) w[n] = static_cast<double>(urgencies.wait[n]);
      break;
    case SchedulerKind::RandomMaximal:
      break;
  }
  return w;
}

std::vector<std::uint8_t> occupancy(const Network& state) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(state.n_queues()));
  for (int n = 0; n < state.n_queues(); ++n) out[n] = state.queue(n).empty() ? 0 : 1;
  return out;
}

FeasibleSchedule max_weight_assignment(int ports, std::span<const double> weights, TieBreak tie,
                                       std::mt19937_64* rng,
                                       std::span<const std::uint8_t> occupied) {
  if (tie == TieBreak::DeterministicLex || rng == nullptr) {
    return matching_schedule(ports, solve_max_assignment(ports, weights, occupied).column_of_row);
  }
  // Relabel ports at random, break ties lexicographically, map back.
  std::vector<int> rows(ports), cols(ports);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(rows.begin(), rows.end(), *rng);
  std::shuffle(cols.begin(), cols.end(), *rng);
  std::vector<double> permuted(weights.size());
  std::vector<std::uint8_t> permuted_occupied(occupied.empty() ? 0 : occupied.size());
  for (int i = 0; i < ports; ++i) {
    for (int j = 0; j < ports; ++j) {
      const std::size_t to = static_cast<std::size_t>(i) * ports + j;
      const std::size_t from = static_cast<std::size_t>(rows[i]) * ports + cols[j];
      permuted[to] = weights[from];
      if (!occupied.empty()) permuted_occupied[to] = occupied[from];
    }
  }
  const auto solved = solve_max_assignment(ports, permuted, permuted_occupied);
  std::vector<int> column_of_row(ports);
  for (int i = 0; i < ports; ++i) column_of_row[rows[i]] = cols[solved.column_of_row[i]];
  return matching_schedule(ports, column_of_row);
}

FeasibleSchedule max_weight_exhaustive(const ScheduleSet& set, std::span<const double> weights,
                                       TieBreak tie, std::mt19937_64* rng,
                                       std::span<const std::uint8_t> occupied) {
  if (static_cast<int>(weights.size()) != set.n_queues()) {
    throw std::invalid_argument("max_weight_exhaustive: weight vector has wrong length");
  }
  if (!occupied.empty() && occupied.size() != weights.size()) {
    throw std::invalid_argument("max_weight_exhaustive: occupancy mask has wrong length");
  }
  const auto& candidates = set.maximal_schedules();  // sorted ascending
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> winners;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double value = schedule_value(weights, candidates[k]);
    if (value > best) {
      best = value;
      winners.assign(1, k);
    } else if (value == best) {
      winners.push_back(k);
    }
  }
  if (winners.empty()) throw std::logic_error("max_weight_exhaustive: empty S_max");
  if (!occupied.empty() && winners.size() > 1) {
    const auto served = [&](std::size_t k) {
      int count = 0;
      for (std::size_t n = 0; n < occupied.size(); ++n) count += candidates[k].bits[n] & occupied[n];
      return count;
    };
    int most = -1;
    std::vector<std::size_t> kept;
    for (std::size_t k : winners) {
      const int c = served(k);
      if (c > most) {
        most = c;
        kept.assign(1, k);
      } else if (c == most) {
        kept.push_back(k);
      }
    }
    winners = std::move(kept);
  }
  if (tie == TieBreak::SeededRandom && rng != nullptr && winners.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, winners.size() - 1);
    return candidates[winners[pick(*rng)]];
  }
  return candidates[winners.front()];
}

FeasibleSchedule select_schedule(const SchedulerSpec& spec, const Network& state,
                                 const UrgencyVector& urgencies, const ScheduleSet& set, Slot tau,
                                 std::mt19937_64* rng) {
  if (spec.kind == SchedulerKind::RandomMaximal) {
    if (rng == nullptr) throw std::invalid_argument("random_maximal needs a random stream");
    if (set.kind() == ScheduleKind::Switch) {
      std::vector<int> perm(set.ports());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), *rng);
      return matching_schedule(set.ports(), perm);
    }
    const auto& all = set.maximal_schedules();
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    return all[pick(*rng)];
  }
  const WeightVector w = compute_weights(spec, state, urgencies, tau);
  const auto occupied = occupancy(state);
  if (set.kind() == ScheduleKind::Switch) {
    return max_weight_assignment(set.ports(), w, spec.tie_break, rng, occupied);
  }
  return max_weight_exhaustive(set, w, spec.tie_break, rng, occupied);
}

Scheduler::Scheduler(SchedulerSpec spec, std::shared_ptr<const ScheduleSet> set, bool verify)
    : spec_(std::move(spec)), set_(std::move(set)), verify_(verify), rng_(spec_.tie_seed) {
  if (!set_) throw std::invalid_argument("Scheduler: schedule set is required");
}

FeasibleSchedule Scheduler::select(const Network& state, const UrgencyVector& urgencies,
                                   Slot tau) {
  FeasibleSchedule chosen;
  if (spec_.kind == SchedulerKind::RandomMaximal) {
    weights_.assign(static_cast<std::size_t>(set_->n_queues()), 0.0);
    chosen = select_schedule(spec_, state, urgencies, *set_, tau, &rng_);
  } else {
    weights_ = compute_weights(spec_, state, urgencies, tau);
    occupied_ = occupancy(state);
    if (set_->kind() == ScheduleKind::Switch) {
      chosen = max_weight_assignment(set_->ports(), weights_, spec_.tie_break, &rng_, occupied_);
    } else {
      chosen = max_weight_exhaustive(*set_, weights_, spec_.tie_break, &rng_, occupied_);
    }
  }

  if (verify_) {
    if (!set_->is_maximal(chosen)) {
      throw std::logic_error("scheduler returned a non-maximal schedule at slot " +
                             std::to_string(tau));
    }
    const bool enumerable =
        set_->kind() != ScheduleKind::Switch || set_->ports() <= 5;
    if (enumerable && spec_.kind != SchedulerKind::RandomMaximal) {
      const auto oracle = max_weight_exhaustive(*set_, weights_, TieBreak::DeterministicLex,
                                                nullptr, occupied_);
      const double got = schedule_value(weights_, chosen);
      const double want = schedule_value(weights_, oracle);
      if (std::abs(got - want) > 1e-9 * std::max(1.0, std::abs(want))) {
        std::ostringstream msg;
        msg << "scheduler value " << got << " below optimum " << want << " at slot " << tau;
        throw std::logic_error(msg.str());
      }
      if (spec_.tie_break == TieBreak::DeterministicLex && chosen != oracle) {
        throw std::logic_error("scheduler tie-break disagrees with enumeration at slot " +
                               std::to_string(tau));
      }
    }
  }
  return chosen;
}

}  // namespace mucf

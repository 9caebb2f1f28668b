#include "mucf/election.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mucf {

VoteMatrix::VoteMatrix(int voters, int candidates)
    : VoteMatrix(voters, candidates,
                 std::vector<double>(static_cast<std::size_t>(std::max(voters, 0)) *
                                     static_cast<std::size_t>(std::max(candidates, 0)))) {}

VoteMatrix::VoteMatrix(int voters, int candidates, std::vector<double> values)
    : voters_(voters), candidates_(candidates), values_(std::move(values)) {
  if (voters < 0 || candidates < 0) throw std::invalid_argument("VoteMatrix: negative dimension");
  if (values_.size() != static_cast<std::size_t>(voters) * static_cast<std::size_t>(candidates)) {
    throw std::invalid_argument("VoteMatrix: value count does not match dimensions");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("VoteMatrix: non-finite vote");
  }
}

std::vector<double> gm_scores(const VoteMatrix& votes) {
  std::vector<double> scores(static_cast<std::size_t>(votes.candidates()), 0.0);
  for (int m = 0; m < votes.voters(); ++m) {
    for (int c = 0; c < votes.candidates(); ++c) scores[c] += votes(m, c);
  }
  return scores;
}

Ranking gm_rank(const VoteMatrix& votes) {
  const auto scores = gm_scores(votes);
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  for (std::size_t k = 1; k < r.order.size(); ++k) {
    if (scores[r.order[k]] == scores[r.order[k - 1]]) r.tie_broken = true;
  }
  return r;
}

// ---------------------------------------------------------------------------
// WeightFunction

WeightFunction::WeightFunction(Kind kind, std::vector<double> breakpoints,
                               std::vector<double> slopes, double rho)
    : kind_(kind), breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)) {
  if (slopes_.size() != breakpoints_.size() + 1) {
    throw std::invalid_argument("weight function: need exactly one more slope than breakpoints");
  }
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i])) {
      throw std::invalid_argument("weight function: non-finite breakpoint");
    }
    if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1])) {
      throw std::invalid_argument("weight function: breakpoints must be strictly increasing");
    }
  }
  double tight = 1.0;
  for (double s : slopes_) {
    if (!std::isfinite(s) || !(s > 0.0)) {
      throw std::invalid_argument("weight function: slopes must be positive and finite");
    }
    tight = std::max({tight, s, 1.0 / s});
  }
  rho_ = rho > 0.0 ? rho : std::max(2.0, tight);
  if (!(rho_ > 1.0)) throw std::invalid_argument("weight function: rho must exceed 1");
  constexpr double kSlack = 1e-12;
  for (double s : slopes_) {
    if (s > rho_ * (1 + kSlack) || s * rho_ < 1 - kSlack) {
      std::ostringstream msg;
      msg << "weight function: slope " << s << " outside [1/rho, rho] for rho = " << rho_;
      throw std::invalid_argument(msg.str());
    }
  }
}

WeightFunction WeightFunction::identity(double rho) {
  return WeightFunction(Kind::Identity, {}, {1.0}, rho);
}

WeightFunction WeightFunction::linear(double slope, double rho) {
  return WeightFunction(Kind::Linear, {}, {slope}, rho);
}

WeightFunction WeightFunction::piecewise(std::vector<double> breakpoints,
                                         std::vector<double> slopes, double rho) {
  return WeightFunction(Kind::PiecewiseLinear, std::move(breakpoints), std::move(slopes), rho);
}

double WeightFunction::eval(double x) const {
  if (breakpoints_.empty()) return slopes_[0] * x;
  // Integrate the slope from 0 to x segment by segment.
  const double lo = std::min(0.0, x);
  const double hi = std::max(0.0, x);
  double acc = 0.0;
  double left = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= breakpoints_.size(); ++i) {
    const double right =
        i < breakpoints_.size() ? breakpoints_[i] : std::numeric_limits<double>::infinity();
    const double a = std::max(lo, left);
    const double b = std::min(hi, right);
    if (b > a) acc += slopes_[i] * (b - a);
    left = right;
  }
  return x >= 0.0 ? acc : -acc;
}

double WeightFunction::antiderivative(double y) const {
  if (breakpoints_.empty()) return 0.5 * slopes_[0] * y * y;
  // f is linear on each piece, so the trapezoid rule is exact there.
  const double lo = std::min(0.0, y);
  const double hi = std::max(0.0, y);
  std::vector<double> cuts{lo};
  for (double b : breakpoints_) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  cuts.push_back(hi);
  double area = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    const double a = cuts[k - 1];
    const double b = cuts[k];
    area += 0.5 * (eval(a) + eval(b)) * (b - a);
  }
  return y >= 0.0 ? area : -area;
}

std::string WeightFunction::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::Identity:
      out << "identity";
      break;
    case Kind::Linear:
      out << "linear(" << slopes_[0] << ")";
      break;
    case Kind::PiecewiseLinear:
      out << "piecewise(" << breakpoints_.size() + 1 << " pieces)";
      break;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Urgencies

UrgencyVector compute_urgencies(const Network& state, const ShadowCFN& cfn, Slot tau,
                                const WeightFunction& f) {
  const int n_queues = state.n_queues();
  UrgencyVector u;
  u.raw.assign(n_queues, 0);
  u.wait.assign(n_queues, 0);
  u.empty.assign(n_queues, 1);
  u.weighted.assign(n_queues, 0.0);

  std::int64_t min_urgency = std::numeric_limits<std::int64_t>::max();
  bool any = false;
  for (int n = 0; n < n_queues; ++n) {
    const QueueState& q = state.queue(n);
    if (q.fifo.empty()) continue;
    const Packet& hol = q.fifo.front();
    u.empty[n] = 0;
    u.raw[n] = tau - cfn.departure_time(hol.id);
    u.wait[n] = tau - hol.arrival_slot;
    min_urgency = std::min(min_urgency, u.raw[n]);
    any = true;
  }
  // -max{0, -min U} over non-empty queues.
  const std::int64_t empty_urgency = any ? std::min<std::int64_t>(0, min_urgency) : 0;
  for (int n = 0; n < n_queues; ++n) {
    if (u.empty[n]) u.raw[n] = empty_urgency;
    u.weighted[n] = f.eval(static_cast<double>(u.raw[n]));
  }
  return u;
}

double schedule_value(std::span<const double> weights, const FeasibleSchedule& pi) {
  if (weights.size() != pi.size()) {
    throw std::invalid_argument("schedule_value: weight and schedule lengths differ");
  }
  double total = 0.0;
  for (std::size_t n = 0; n < pi.size(); ++n) {
    if (pi.bits[n]) total += weights[n];
  }
  return total;
}

double schedule_value(const UrgencyVector& urgencies, const FeasibleSchedule& pi) {
  return schedule_value(std::span<const double>(urgencies.weighted), pi);
}

}  // namespace mucf

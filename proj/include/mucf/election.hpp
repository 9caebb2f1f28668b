#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mucf/core.hpp"
#include "mucf/schedules.hpp"
#include "mucf/shadow.hpp"
#include "mucf/types.hpp"

namespace mucf {

/// Cardinal ballots: value(voter, candidate), row-major by voter.
class VoteMatrix {
 public:
  VoteMatrix(int voters, int candidates);
  VoteMatrix(int voters, int candidates, std::vector<double> values);

  int voters() const { return voters_; }
  int candidates() const { return candidates_; }
  double operator()(int voter, int candidate) const {
    return values_[static_cast<std::size_t>(voter) * candidates_ + candidate];
  }
  double& operator()(int voter, int candidate) {
    return values_[static_cast<std::size_t>(voter) * candidates_ + candidate];
  }

 private:
  int voters_;
  int candidates_;
  std::vector<double> values_;
};

/// Net score s_c = sum over voters of a_mc.
std::vector<double> gm_scores(const VoteMatrix& votes);

struct Ranking {
  std::vector<int> order;  // best first
  /// Set when two candidates share a score; such pairs are ordered by index.
  bool tie_broken = false;
};

/// Candidates by descending net score.
Ranking gm_rank(const VoteMatrix& votes);

/// Non-decreasing piecewise-linear f with f(0) = 0, defined by its slopes
/// between breakpoints. Every slope must lie in [1/rho, rho], which makes f
/// bi-Lipschitz with constant rho.
class WeightFunction {
 public:
  enum class Kind { Identity, Linear, PiecewiseLinear };

  static WeightFunction identity(double rho = 2.0);
  static WeightFunction linear(double slope, double rho = 0.0);
  /// slopes.size() == breakpoints.size() + 1; breakpoints strictly increasing.
  static WeightFunction piecewise(std::vector<double> breakpoints, std::vector<double> slopes,
                                  double rho = 0.0);

  Kind kind() const { return kind_; }
  double rho() const { return rho_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& slopes() const { return slopes_; }

  double operator()(double x) const { return eval(x); }
  double eval(double x) const;
  /// F(y) = integral of f from 0 to y, in closed form.
  double antiderivative(double y) const;

  std::string describe() const;

 private:
  WeightFunction(Kind kind, std::vector<double> breakpoints, std::vector<double> slopes,
                 double rho);

  Kind kind_;
  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  double rho_;
};

inline double eval_weight(const WeightFunction& f, double x) { return f.eval(x); }
inline double eval_antiderivative(const WeightFunction& f, double y) {
  return f.antiderivative(y);
}

struct UrgencyVector {
  std::vector<std::int64_t> raw;   // U_n
  std::vector<double> weighted;    // f(U_n)
  std::vector<std::int64_t> wait;  // W_n, zero for an empty queue
  std::vector<std::uint8_t> empty;

  std::int64_t delta(int n) const { return wait[n] - raw[n]; }
};

/// U_n = tau - d_n for a non-empty queue, where d_n is the shadow departure
/// of its head-of-line packet. An empty queue takes min(0, smallest
/// non-empty urgency); all-empty gives zeros.
UrgencyVector compute_urgencies(const Network& state, const ShadowCFN& cfn, Slot tau,
                                const WeightFunction& f);

/// Sum over served queues of the weighted urgency.
double schedule_value(const UrgencyVector& urgencies, const FeasibleSchedule& pi);
double schedule_value(std::span<const double> weights, const FeasibleSchedule& pi);

}  // namespace mucf

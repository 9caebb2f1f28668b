#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mucf/core.hpp"
#include "mucf/election.hpp"
#include "mucf/schedules.hpp"
#include "mucf/shadow.hpp"
#include "mucf/types.hpp"

namespace mucf {

/// Running first and second moments with compensated (Neumaier) summation.
class MomentAccumulator {
 public:
  void add(double x);
  void merge(const MomentAccumulator& other);

  std::int64_t count() const { return count_; }
  double sum() const { return sum_ + sum_c_; }
  double sum_squares() const { return sq_ + sq_c_; }
  double mean() const;
  double second_moment() const;
  double min() const { return min_; }
  double max() const { return max_; }

 private:
  static void neumaier(double& sum, double& comp, double x);

  std::int64_t count_ = 0;
  double sum_ = 0.0, sum_c_ = 0.0;
  double sq_ = 0.0, sq_c_ = 0.0;
  double min_ = 0.0, max_ = 0.0;
};

struct PacketRecord {
  PacketId id = 0;
  int queue = 0;
  int output = 0;
  Slot arrival = 0;
  Slot shadow_departure = 0;
  Slot real_departure = 0;

  Slot latency() const { return real_departure - arrival; }
  /// Signed: negative when the real network beat the shadow.
  Slot oq_delay() const { return real_departure - shadow_departure; }
};

struct TimeSeriesRow {
  Slot tau = 0;
  double lyapunov = 0.0;
  double abs_wait = 0.0;
  double abs_delta = 0.0;
  std::vector<std::int64_t> theta;  // per shadow output line
};

struct RunMetrics {
  std::vector<double> lambda;
  Slot slots = 0;   // number of simulated slots
  Slot warmup = 0;  // packets departing before this slot are excluded from moments
  std::vector<std::int64_t> departures;  // D_n
  std::vector<std::int64_t> arrivals;    // sum of A_n
  MomentAccumulator latency;
  MomentAccumulator oq_delay;
  std::int64_t completed_packets = 0;
  std::vector<PacketRecord> packets;  // only when packet recording is on
  std::vector<TimeSeriesRow> series;
  /// Per-slot probe values (only when the per-slot Lyapunov probe is on).
  std::vector<double> slot_abs_wait;
  std::vector<double> slot_lyapunov;
};

// --- admissibility --------------------------------------------------------

struct AdmissibilityVerdict {
  bool admissible = false;
  /// gamma = 1 - min sum(alpha); -inf when some loaded queue is never served.
  double slack = 0.0;
  std::vector<double> alpha;
  std::vector<FeasibleSchedule> schedules;

  bool has_witness() const { return !alpha.empty(); }
};

/// Strict admissibility of lambda for S. Switches use the row/column sums of
/// the rate matrix (all < 1) with a Birkhoff-von Neumann witness; other
/// kinds solve min sum(alpha) s.t. sum alpha_i pi^i >= lambda over S_max.
AdmissibilityVerdict check_admissibility(const ScheduleSet& set, std::span<const double> lambda);

/// Direct arithmetic check: sum alpha_i pi^i >= lambda - tol and sum alpha < 1.
bool verify_witness(const AdmissibilityVerdict& verdict, std::span<const double> lambda,
                    double tol = 1e-9);

// --- rate stability -------------------------------------------------------

struct RateStabilityRow {
  int queue = 0;
  double lambda = 0.0;
  double empirical_arrival_rate = 0.0;
  double departure_rate = 0.0;
  double deviation_nominal = 0.0;    // |D_n/tau - lambda_n|
  double deviation_empirical = 0.0;  // |D_n/tau - A_n/tau|
  bool flagged = false;
};

struct RateStabilityReport {
  std::vector<RateStabilityRow> rows;
  double max_deviation_nominal = 0.0;
  double max_deviation_empirical = 0.0;
  double tolerance = 0.0;

  bool stable() const;
};

RateStabilityReport rate_stability_report(const RunMetrics& metrics, std::span<const double> lambda,
                                          Slot tau_final, double tolerance = 0.01);

// --- moments --------------------------------------------------------------

struct MomentSummary {
  std::int64_t samples = 0;
  double first = 0.0;
  double second = 0.0;
  double log_first = 0.0;   // NaN when first <= 0
  double log_second = 0.0;  // NaN when second <= 0
};

struct MomentReport {
  MomentSummary latency;
  MomentSummary oq_delay;
};

/// Throws std::runtime_error when no packet departed after warmup.
MomentReport moment_report(const RunMetrics& metrics);
MomentSummary summarize(const MomentAccumulator& acc);

// --- Lyapunov drift -------------------------------------------------------

struct LyapunovSample {
  Slot tau = 0;
  double lyapunov = 0.0;  // sum_n lambda_n F(W_n)
  double abs_wait = 0.0;  // |W|
  double abs_delta = 0.0; // |Delta|
};

LyapunovSample lyapunov_probe(const Network& state, const UrgencyVector& urgencies,
                              std::span<const double> lambda, const WeightFunction& f, Slot tau);

struct DriftBin {
  double wait_lo = 0.0;
  double wait_hi = 0.0;
  double mean_drift = 0.0;
  std::int64_t count = 0;
};

/// Pairs |W(t)| with L(t+1) - L(t) and splits the pairs into `bins`
/// equal-count bins ordered by |W|.
std::vector<DriftBin> binned_drift(std::span<const double> abs_wait,
                                   std::span<const double> lyapunov, int bins);

// --- busy cycles ----------------------------------------------------------

/// Theta_m sampled as a run passes its checkpoints.
class BusyCycleProbe {
 public:
  explicit BusyCycleProbe(std::vector<Slot> checkpoints);

  /// Call after each served slot with the number of slots completed.
  void observe(const ShadowCFN& cfn, Slot slots_done);

  const std::vector<Slot>& checkpoints() const { return checkpoints_; }
  /// theta()[k][m] is Theta_m at checkpoints()[k] (only reached checkpoints).
  const std::vector<std::vector<std::int64_t>>& theta() const { return theta_; }

 private:
  std::vector<Slot> checkpoints_;
  std::size_t next_ = 0;
  std::vector<std::vector<std::int64_t>> theta_;
};

struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares y ~ a + b log(t).
LogFit fit_against_log(std::span<const double> t, std::span<const double> y);

/// Distinct floor(ratio^k) values up to horizon, always ending at horizon.
std::vector<Slot> geometric_checkpoints(Slot horizon, double ratio = 1.5);

}  // namespace mucf

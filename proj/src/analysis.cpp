#include "mucf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mucf/lp.hpp"

namespace mucf {

// ---------------------------------------------------------------------------
// MomentAccumulator

void MomentAccumulator::neumaier(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

void MomentAccumulator::add(double x) {
  if (count_ == 0) {
    min_ = max_ = x;
  } else {
    min_ = std::min(min_, x);
    max_ = std::max(max_, x);
  }
  ++count_;
  neumaier(sum_, sum_c_, x);
  neumaier(sq_, sq_c_, x * x);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  count_ += other.count_;
  min_ = std::min(min_, other.min_);
  max_ = std::max(max_, other.max_);
  neumaier(sum_, sum_c_, other.sum_);
  neumaier(sum_, sum_c_, other.sum_c_);
  neumaier(sq_, sq_c_, other.sq_);
  neumaier(sq_, sq_c_, other.sq_c_);
}

double MomentAccumulator::mean() const {
  return count_ ? sum() / static_cast<double>(count_) : std::numeric_limits<double>::quiet_NaN();
}

double MomentAccumulator::second_moment() const {
  return count_ ? sum_squares() / static_cast<double>(count_)
                : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Admissibility

namespace {

// Kuhn's augmenting-path matching on the support of a square matrix.
bool find_support_matching(const std::vector<double>& x, int m, double floor_value,
                           std::vector<int>& col_of) {
  std::vector<int> row_of(m, -1);
  col_of.assign(m, -1);
  std::vector<char> seen(m);
  auto augment = [&](auto&& self, int i) -> bool {
    for (int j = 0; j < m; ++j) {
      if (seen[j] || x[static_cast<std::size_t>(i) * m + j] <= floor_value) continue;
      seen[j] = 1;
      if (row_of[j] < 0 || self(self, row_of[j])) {
        row_of[j] = i;
        col_of[i] = j;
        return true;
      }
    }
    return false;
  };
  for (int i = 0; i < m; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    if (!augment(augment, i)) return false;
  }
  return true;
}

AdmissibilityVerdict switch_admissibility(int m, std::span<const double> lambda) {
  AdmissibilityVerdict verdict;
  double load = 0.0;
  for (int i = 0; i < m; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < m; ++j) {
      row += lambda[static_cast<std::size_t>(i) * m + j];
      col += lambda[static_cast<std::size_t>(j) * m + i];
    }
    load = std::max({load, row, col});
  }
  verdict.slack = 1.0 - load;
  verdict.admissible = load < 1.0;
  if (!verdict.admissible || load == 0.0) return verdict;

  // Scale to a doubly substochastic matrix with unit max line sum, pad to a
  // doubly stochastic one, then peel off permutation matrices.
  std::vector<double> x(lambda.begin(), lambda.end());
  for (double& v : x) v /= load;
  std::vector<double> row_def(m, 1.0), col_def(m, 1.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      row_def[i] -= x[static_cast<std::size_t>(i) * m + j];
      col_def[j] -= x[static_cast<std::size_t>(i) * m + j];
    }
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double add = std::max(0.0, std::min(row_def[i], col_def[j]));
      x[static_cast<std::size_t>(i) * m + j] += add;
      row_def[i] -= add;
      col_def[j] -= add;
    }
  }

  constexpr double kFloor = 1e-12;
  double remaining = 1.0;
  std::vector<int> col_of;
  for (int iter = 0; iter < m * m + 1 && remaining > kFloor; ++iter) {
    if (!find_support_matching(x, m, kFloor, col_of)) break;
    double theta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) theta = std::min(theta, x[static_cast<std::size_t>(i) * m + col_of[i]]);
    for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i) * m + col_of[i]] -= theta;
    verdict.alpha.push_back(theta * load);
    verdict.schedules.push_back(matching_schedule(m, col_of));
    remaining -= theta;
  }
  return verdict;
}

}  // namespace

AdmissibilityVerdict check_admissibility(const ScheduleSet& set, std::span<const double> lambda) {
  if (static_cast<int>(lambda.size()) != set.n_queues()) {
    throw std::invalid_argument("check_admissibility: rate vector has wrong length");
  }
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("check_admissibility: rates must be finite and non-negative");
    }
  }
  if (set.kind() == ScheduleKind::Switch) return switch_admissibility(set.ports(), lambda);

  const auto& maximal = set.maximal_schedules();
  std::vector<std::vector<double>> a;
  a.reserve(maximal.size());
  for (const auto& pi : maximal) a.emplace_back(pi.bits.begin(), pi.bits.end());
  const std::vector<double> b(maximal.size(), 1.0);
  const std::vector<double> c(lambda.begin(), lambda.end());
  const LpResult lp = solve_packing_lp(a, b, c);

  AdmissibilityVerdict verdict;
  if (lp.status == LpResult::Status::Unbounded) {
    verdict.admissible = false;
    verdict.slack = -std::numeric_limits<double>::infinity();
    return verdict;
  }
  verdict.slack = 1.0 - lp.value;
  verdict.admissible = lp.value < 1.0;
  if (verdict.admissible) {
    for (std::size_t i = 0; i < maximal.size(); ++i) {
      if (lp.dual[i] > 1e-12) {
        verdict.alpha.push_back(lp.dual[i]);
        verdict.schedules.push_back(maximal[i]);
      }
    }
  }
  return verdict;
}

bool verify_witness(const AdmissibilityVerdict& verdict, std::span<const double> lambda,
                    double tol) {
  if (verdict.alpha.size() != verdict.schedules.size()) return false;
  std::vector<double> covered(lambda.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < verdict.alpha.size(); ++k) {
    if (verdict.alpha[k] < 0.0) return false;
    if (verdict.schedules[k].size() != lambda.size()) return false;
    total += verdict.alpha[k];
    for (std::size_t n = 0; n < lambda.size(); ++n) {
      covered[n] += verdict.alpha[k] * verdict.schedules[k].bits[n];
    }
  }
  for (std::size_t n = 0; n < lambda.size(); ++n) {
    if (covered[n] < lambda[n] - tol) return false;
  }
  return total < 1.0;
}

// ---------------------------------------------------------------------------
// Rate stability

bool RateStabilityReport::stable() const {
  return std::none_of(rows.begin(), rows.end(), [](const RateStabilityRow& r) { return r.flagged; });
}

RateStabilityReport rate_stability_report(const RunMetrics& metrics, std::span<const double> lambda,
                                          Slot tau_final, double tolerance) {
  if (tau_final <= 0) throw std::invalid_argument("rate_stability_report: empty horizon");
  if (lambda.size() != metrics.departures.size() || lambda.size() != metrics.arrivals.size()) {
    throw std::invalid_argument("rate_stability_report: rate vector has wrong length");
  }
  RateStabilityReport report;
  report.tolerance = tolerance;
  const double t = static_cast<double>(tau_final);
  for (std::size_t n = 0; n < lambda.size(); ++n) {
    RateStabilityRow row;
    row.queue = static_cast<int>(n);
    row.lambda = lambda[n];
    row.departure_rate = static_cast<double>(metrics.departures[n]) / t;
    row.empirical_arrival_rate = static_cast<double>(metrics.arrivals[n]) / t;
    row.deviation_nominal = std::abs(row.departure_rate - row.lambda);
    row.deviation_empirical = std::abs(row.departure_rate - row.empirical_arrival_rate);
    row.flagged = row.deviation_nominal > tolerance;
    report.max_deviation_nominal = std::max(report.max_deviation_nominal, row.deviation_nominal);
    report.max_deviation_empirical =
        std::max(report.max_deviation_empirical, row.deviation_empirical);
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Moments

MomentSummary summarize(const MomentAccumulator& acc) {
  MomentSummary s;
  s.samples = acc.count();
  s.first = acc.mean();
  s.second = acc.second_moment();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.log_first = s.first > 0 ? std::log(s.first) : nan;
  s.log_second = s.second > 0 ? std::log(s.second) : nan;
  return s;
}

MomentReport moment_report(const RunMetrics& metrics) {
  if (metrics.latency.count() == 0) {
    throw std::runtime_error("moment_report: no packet departures after warmup");
  }
  return {summarize(metrics.latency), summarize(metrics.oq_delay)};
}

// ---------------------------------------------------------------------------
// Lyapunov

LyapunovSample lyapunov_probe(const Network& state, const UrgencyVector& urgencies,
                              std::span<const double> lambda, const WeightFunction& f, Slot tau) {
  const int n_queues = state.n_queues();
  if (static_cast<int>(lambda.size()) != n_queues ||
      static_cast<int>(urgencies.wait.size()) != n_queues) {
    throw std::invalid_argument("lyapunov_probe: length mismatch");
  }
  LyapunovSample s;
  s.tau = tau;
  for (int n = 0; n < n_queues; ++n) {
    const auto w = static_cast<double>(urgencies.wait[n]);
    s.lyapunov += lambda[n] * f.antiderivative(w);
    s.abs_wait += w;
    s.abs_delta += static_cast<double>(urgencies.delta(n));
  }
  return s;
}

std::vector<DriftBin> binned_drift(std::span<const double> abs_wait,
                                   std::span<const double> lyapunov, int bins) {
  if (abs_wait.size() != lyapunov.size()) {
    throw std::invalid_argument("binned_drift: series lengths differ");
  }
  if (bins < 1) throw std::invalid_argument("binned_drift: need at least one bin");
  if (abs_wait.size() < 2) return {};
  const std::size_t pairs = abs_wait.size() - 1;
  std::vector<std::size_t> order(pairs);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return abs_wait[a] < abs_wait[b]; });

  std::vector<DriftBin> out;
  const auto n_bins = static_cast<std::size_t>(bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const std::size_t lo = pairs * k / n_bins;
    const std::size_t hi = pairs * (k + 1) / n_bins;
    if (hi <= lo) continue;
    DriftBin bin;
    bin.wait_lo = abs_wait[order[lo]];
    bin.wait_hi = abs_wait[order[hi - 1]];
    double sum = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      const std::size_t t = order[r];
      sum += lyapunov[t + 1] - lyapunov[t];
    }
    bin.count = static_cast<std::int64_t>(hi - lo);
    bin.mean_drift = sum / static_cast<double>(bin.count);
    out.push_back(bin);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Busy cycles

BusyCycleProbe::BusyCycleProbe(std::vector<Slot> checkpoints) : checkpoints_(std::move(checkpoints)) {
  std::sort(checkpoints_.begin(), checkpoints_.end());
  checkpoints_.erase(std::unique(checkpoints_.begin(), checkpoints_.end()), checkpoints_.end());
}

void BusyCycleProbe::observe(const ShadowCFN& cfn, Slot slots_done) {
  while (next_ < checkpoints_.size() && checkpoints_[next_] <= slots_done) {
    std::vector<std::int64_t> row(static_cast<std::size_t>(cfn.n_outputs()));
    for (int m = 0; m < cfn.n_outputs(); ++m) row[m] = cfn.theta(m);
    theta_.push_back(std::move(row));
    ++next_;
  }
}

LogFit fit_against_log(std::span<const double> t, std::span<const double> y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw std::invalid_argument("fit_against_log: need two or more paired points");
  }
  const auto n = static_cast<double>(t.size());
  double sx = 0, sy = 0;
  std::vector<double> x(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0)) throw std::invalid_argument("fit_against_log: t must be positive");
    x[k] = std::log(t[k]);
    sx += x[k];
    sy += y[k];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LogFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

std::vector<Slot> geometric_checkpoints(Slot horizon, double ratio) {
  if (!(ratio > 1.0)) throw std::invalid_argument("geometric_checkpoints: ratio must exceed 1");
  std::vector<Slot> out;
  for (double v = 1.0; v < static_cast<double>(horizon); v *= ratio) {
    const auto slot = static_cast<Slot>(std::floor(v));
    if (out.empty() || out.back() != slot) out.push_back(slot);
  }
  if (horizon > 0 && (out.empty() || out.back() != horizon)) out.push_back(horizon);
  return out;
}

}  // namespace mucf

#include "mucf/schedules.hpp"

#include <algorithm>
#include <bit>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mucf {

std::size_t FeasibleSchedule::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool FeasibleSchedule::dominated_by(const FeasibleSchedule& other) const {
  if (other.size() != size()) return false;
  for (std::size_t n = 0; n < size(); ++n) {
    if (bits[n] > other.bits[n]) return false;
  }
  return true;
}

struct ScheduleSet::Cache {
  std::once_flag once;
  std::vector<FeasibleSchedule> maximal;
};

namespace {

void check_binary(const FeasibleSchedule& pi) {
  for (auto b : pi.bits) {
    if (b > 1) throw std::invalid_argument("schedule entries must be 0 or 1");
  }
}

// Bron-Kerbosch with pivoting on the complement graph: maximal cliques of the
// complement are the maximal independent sets of the conflict graph.
void bron_kerbosch(std::uint32_t r, std::uint32_t p, std::uint32_t x,
                   const std::vector<std::uint32_t>& compatible,
                   std::vector<std::uint32_t>& out) {
  if (p == 0 && x == 0) {
    out.push_back(r);
    return;
  }
  std::uint32_t candidates = p | x;
  int pivot = std::countr_zero(candidates);
  int best = -1;
  for (std::uint32_t c = candidates; c != 0; c &= c - 1) {
    int u = std::countr_zero(c);
    int score = std::popcount(p & compatible[u]);
    if (score > best) {
      best = score;
      pivot = u;
    }
  }
  for (std::uint32_t rest = p & ~compatible[pivot]; rest != 0; rest &= rest - 1) {
    int v = std::countr_zero(rest);
    std::uint32_t bit = 1u << v;
    bron_kerbosch(r | bit, p & compatible[v], x & compatible[v], compatible, out);
    p &= ~bit;
    x |= bit;
  }
}

}  // namespace

FeasibleSchedule matching_schedule(int ports, const std::vector<int>& column_of_row) {
  if (static_cast<int>(column_of_row.size()) != ports) {
    throw std::invalid_argument("matching_schedule: assignment length != ports");
  }
  FeasibleSchedule pi(static_cast<std::size_t>(ports) * ports);
  for (int i = 0; i < ports; ++i) {
    int j = column_of_row[i];
    if (j < 0) continue;
    pi.bits[static_cast<std::size_t>(i) * ports + j] = 1;
  }
  return pi;
}

ScheduleSet ScheduleSet::make_switch(int ports) {
  if (ports < 1) throw std::invalid_argument("switch needs at least one port");
  ScheduleSet s;
  s.kind_ = ScheduleKind::Switch;
  s.ports_ = ports;
  s.n_queues_ = ports * ports;
  s.cache_ = std::make_shared<Cache>();
  return s;
}

ScheduleSet ScheduleSet::make_conflict_graph(int nodes, std::vector<std::pair<int, int>> edges) {
  if (nodes < 1) throw std::invalid_argument("conflict graph needs at least one node");
  ScheduleSet s;
  s.kind_ = ScheduleKind::ConflictGraph;
  s.n_queues_ = nodes;
  s.neighbours_.assign(nodes, {});
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= nodes || b >= nodes) {
      throw std::invalid_argument("conflict edge references unknown node");
    }
    if (a == b) throw std::invalid_argument("conflict edge is a self-loop");
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second) continue;
    s.edges_.emplace_back(key.first, key.second);
    s.neighbours_[a].push_back(b);
    s.neighbours_[b].push_back(a);
  }
  s.cache_ = std::make_shared<Cache>();
  return s;
}

ScheduleSet ScheduleSet::make_explicit(int n_queues, std::vector<FeasibleSchedule> schedules) {
  if (n_queues < 1) throw std::invalid_argument("explicit set needs at least one queue");
  ScheduleSet s;
  s.kind_ = ScheduleKind::Explicit;
  s.n_queues_ = n_queues;
  for (const auto& pi : schedules) {
    if (static_cast<int>(pi.size()) != n_queues) {
      throw std::invalid_argument("explicit schedule length does not match queue count");
    }
    check_binary(pi);
  }
  s.explicit_list_ = schedules;

  std::sort(schedules.begin(), schedules.end());
  schedules.erase(std::unique(schedules.begin(), schedules.end()), schedules.end());
  for (std::size_t a = 0; a < schedules.size(); ++a) {
    bool dominated = false;
    for (std::size_t b = 0; b < schedules.size() && !dominated; ++b) {
      dominated = a != b && schedules[a].dominated_by(schedules[b]);
    }
    if (!dominated) s.explicit_maximal_.push_back(schedules[a]);
  }
  if (s.explicit_maximal_.empty()) {
    s.explicit_maximal_.push_back(FeasibleSchedule(static_cast<std::size_t>(n_queues)));
  }
  s.cache_ = std::make_shared<Cache>();
  return s;
}

void ScheduleSet::check_length(const FeasibleSchedule& pi) const {
  if (static_cast<int>(pi.size()) != n_queues_) {
    std::ostringstream msg;
    msg << "schedule length " << pi.size() << " does not match N = " << n_queues_;
    throw std::invalid_argument(msg.str());
  }
}

bool ScheduleSet::contains(const FeasibleSchedule& pi) const {
  check_length(pi);
  check_binary(pi);
  switch (kind_) {
    case ScheduleKind::Switch: {
      const int m = ports_;
      std::vector<int> col_use(m, 0);
      for (int i = 0; i < m; ++i) {
        int row_use = 0;
        for (int j = 0; j < m; ++j) {
          if (pi.bits[static_cast<std::size_t>(i) * m + j]) {
            if (++row_use > 1 || ++col_use[j] > 1) return false;
          }
        }
      }
      return true;
    }
    case ScheduleKind::ConflictGraph:
      for (auto [a, b] : edges_) {
        if (pi.bits[a] && pi.bits[b]) return false;
      }
      return true;
    case ScheduleKind::Explicit:
      return std::any_of(explicit_maximal_.begin(), explicit_maximal_.end(),
                         [&](const FeasibleSchedule& mu) { return pi.dominated_by(mu); });
  }
  return false;
}

bool ScheduleSet::can_add(const FeasibleSchedule& pi, int n) const {
  if (pi.bits[n]) return false;
  switch (kind_) {
    case ScheduleKind::Switch: {
      const int m = ports_;
      const int row = n / m;
      const int col = n % m;
      for (int k = 0; k < m; ++k) {
        if (pi.bits[static_cast<std::size_t>(row) * m + k]) return false;
        if (pi.bits[static_cast<std::size_t>(k) * m + col]) return false;
      }
      return true;
    }
    case ScheduleKind::ConflictGraph:
      return std::none_of(neighbours_[n].begin(), neighbours_[n].end(),
                          [&](int v) { return pi.bits[v] != 0; });
    case ScheduleKind::Explicit: {
      FeasibleSchedule grown = pi;
      grown.bits[n] = 1;
      return contains(grown);
    }
  }
  return false;
}

bool ScheduleSet::is_maximal(const FeasibleSchedule& pi) const {
  if (!contains(pi)) return false;
  for (int n = 0; n < n_queues_; ++n) {
    if (can_add(pi, n)) return false;
  }
  return true;
}

FeasibleSchedule ScheduleSet::maximalize(const FeasibleSchedule& pi) const {
  if (!contains(pi)) throw std::invalid_argument("maximalize: schedule is not in S");
  FeasibleSchedule mu = pi;
  for (int n = 0; n < n_queues_; ++n) {
    if (can_add(mu, n)) mu.bits[n] = 1;
  }
  return mu;
}

void ScheduleSet::check_guard() const {
  if (kind_ == ScheduleKind::Switch && ports_ > kMaxEnumeratedPorts) {
    throw std::length_error("S_max enumeration guard: switch with " + std::to_string(ports_) +
                            " ports exceeds " + std::to_string(kMaxEnumeratedPorts));
  }
  if (kind_ == ScheduleKind::ConflictGraph && n_queues_ > kMaxEnumeratedNodes) {
    throw std::length_error("S_max enumeration guard: conflict graph with " +
                            std::to_string(n_queues_) + " nodes exceeds " +
                            std::to_string(kMaxEnumeratedNodes));
  }
}

std::vector<FeasibleSchedule> ScheduleSet::enumerate() const {
  check_guard();
  std::vector<FeasibleSchedule> out;
  switch (kind_) {
    case ScheduleKind::Switch: {
      std::vector<int> perm(ports_);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        out.push_back(matching_schedule(ports_, perm));
      } while (std::next_permutation(perm.begin(), perm.end()));
      break;
    }
    case ScheduleKind::ConflictGraph: {
      const std::uint32_t all = (std::uint32_t{1} << n_queues_) - 1;
      std::vector<std::uint32_t> compatible(n_queues_, all);
      for (int v = 0; v < n_queues_; ++v) {
        compatible[v] &= ~(std::uint32_t{1} << v);
        for (int u : neighbours_[v]) compatible[v] &= ~(std::uint32_t{1} << u);
      }
      std::vector<std::uint32_t> masks;
      bron_kerbosch(0, all, 0, compatible, masks);
      for (auto mask : masks) {
        FeasibleSchedule pi(static_cast<std::size_t>(n_queues_));
        for (int v = 0; v < n_queues_; ++v) pi.bits[v] = (mask >> v) & 1u;
        out.push_back(std::move(pi));
      }
      break;
    }
    case ScheduleKind::Explicit:
      out = explicit_maximal_;
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<FeasibleSchedule>& ScheduleSet::maximal_schedules() const {
  check_guard();
  std::call_once(cache_->once, [this] { cache_->maximal = enumerate(); });
  return cache_->maximal;
}

ValidationReport ScheduleSet::validate() const {
  ValidationReport report;
  if (kind_ != ScheduleKind::Explicit) return report;

  std::set<FeasibleSchedule> present(explicit_list_.begin(), explicit_list_.end());
  std::set<FeasibleSchedule> missing;
  for (const auto& pi : explicit_list_) {
    std::vector<int> ones;
    for (int n = 0; n < n_queues_; ++n) {
      if (pi.bits[n]) ones.push_back(n);
    }
    if (ones.size() > 20) {
      throw std::length_error("validate: schedule with more than 20 served queues");
    }
    const std::uint32_t subsets = std::uint32_t{1} << ones.size();
    for (std::uint32_t mask = 0; mask + 1 < subsets; ++mask) {
      FeasibleSchedule sigma(static_cast<std::size_t>(n_queues_));
      for (std::size_t k = 0; k < ones.size(); ++k) {
        if ((mask >> k) & 1u) sigma.bits[ones[k]] = 1;
      }
      if (!present.count(sigma)) missing.insert(std::move(sigma));
    }
  }
  report.missing_subsets.assign(missing.begin(), missing.end());
  report.monotone = report.missing_subsets.empty();
  for (const auto& sigma : report.missing_subsets) {
    std::ostringstream msg;
    msg << "monotonicity: subset (";
    for (std::size_t n = 0; n < sigma.size(); ++n) msg << (n ? "," : "") << int(sigma.bits[n]);
    msg << ") missing";
    report.messages.push_back(msg.str());
  }

  for (int n = 0; n < n_queues_; ++n) {
    bool covered = std::any_of(explicit_list_.begin(), explicit_list_.end(),
                               [n](const FeasibleSchedule& pi) { return pi.bits[n] != 0; });
    if (!covered) {
      report.uncovered_queues.push_back(n);
      report.messages.push_back("coverage: no schedule serves queue " + std::to_string(n));
    }
  }
  report.covering = report.uncovered_queues.empty();
  return report;
}

std::string ScheduleSet::describe() const {
  std::ostringstream out;
  switch (kind_) {
    case ScheduleKind::Switch:
      out << "switch(" << ports_ << ")";
      break;
    case ScheduleKind::ConflictGraph:
      out << "conflict_graph(nodes=" << n_queues_ << ", edges=" << edges_.size() << ")";
      break;
    case ScheduleKind::Explicit:
      out << "explicit(N=" << n_queues_ << ", maximal=" << explicit_maximal_.size() << ")";
      break;
  }
  return out.str();
}

const std::vector<FeasibleSchedule>& enumerate_maximal(const ScheduleSet& set) {
  return set.maximal_schedules();
}

}  // namespace mucf

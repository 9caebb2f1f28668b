#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mucf {

/// A service vector pi in {0,1}^N. Comparison is lexicographic on the bits.
struct FeasibleSchedule {
  std::vector<std::uint8_t> bits;

  FeasibleSchedule() = default;
  explicit FeasibleSchedule(std::size_t n) : bits(n, 0) {}
  explicit FeasibleSchedule(std::vector<std::uint8_t> b) : bits(std::move(b)) {}

  std::size_t size() const { return bits.size(); }
  bool serves(std::size_t n) const { return bits[n] != 0; }
  std::size_t count() const;
  /// Componentwise this <= other.
  bool dominated_by(const FeasibleSchedule& other) const;

  auto operator<=>(const FeasibleSchedule&) const = default;
};

enum class ScheduleKind { Switch, ConflictGraph, Explicit };

struct ValidationReport {
  bool monotone = true;
  bool covering = true;
  std::vector<FeasibleSchedule> missing_subsets;
  std::vector<int> uncovered_queues;
  std::vector<std::string> messages;

  bool valid() const { return monotone && covering; }
};

/// Size guards for explicit enumeration of S_max.
inline constexpr int kMaxEnumeratedPorts = 8;
inline constexpr int kMaxEnumeratedNodes = 24;

/// The feasible set S of a constrained queueing network together with its
/// maximal elements S_max.
///
/// Switch sets index queue (i, j) as n = i * M + j and their maximal
/// schedules are the M! perfect matchings. Conflict-graph sets are the
/// independent sets of an undirected graph over the link nodes. Explicit
/// sets are stored as their maximal elements; membership is the monotone
/// closure of that list.
///
/// Instances are immutable once built. S_max is materialized on first
/// request (thread-safe) and guarded by kMaxEnumeratedPorts /
/// kMaxEnumeratedNodes.
class ScheduleSet {
 public:
  static ScheduleSet make_switch(int ports);
  static ScheduleSet make_conflict_graph(int nodes, std::vector<std::pair<int, int>> edges);
  static ScheduleSet make_explicit(int n_queues, std::vector<FeasibleSchedule> schedules);

  ScheduleKind kind() const { return kind_; }
  int n_queues() const { return n_queues_; }
  /// Switch port count M; zero for other kinds.
  int ports() const { return ports_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  /// Schedules exactly as supplied to make_explicit.
  const std::vector<FeasibleSchedule>& explicit_list() const { return explicit_list_; }

  bool contains(const FeasibleSchedule& pi) const;
  bool is_maximal(const FeasibleSchedule& pi) const;
  /// Greedy completion over ascending queue index. Requires pi in S.
  FeasibleSchedule maximalize(const FeasibleSchedule& pi) const;
  /// Throws std::length_error when the enumeration guard is exceeded.
  const std::vector<FeasibleSchedule>& maximal_schedules() const;
  /// Checks the raw explicit list for monotone closure and coverage.
  /// Structural kinds are monotone and covering by construction.
  ValidationReport validate() const;

  std::string describe() const;

 private:
  ScheduleSet() = default;

  bool can_add(const FeasibleSchedule& pi, int n) const;
  void check_length(const FeasibleSchedule& pi) const;
  void check_guard() const;
  std::vector<FeasibleSchedule> enumerate() const;

  struct Cache;

  ScheduleKind kind_ = ScheduleKind::Explicit;
  int n_queues_ = 0;
  int ports_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbours_;
  std::vector<FeasibleSchedule> explicit_list_;
  std::vector<FeasibleSchedule> explicit_maximal_;
  std::shared_ptr<Cache> cache_;
};

/// S_max as an explicit list; same guard as ScheduleSet::maximal_schedules.
const std::vector<FeasibleSchedule>& enumerate_maximal(const ScheduleSet& set);

/// Builds an M x M switch schedule from a row -> column assignment.
FeasibleSchedule matching_schedule(int ports, const std::vector<int>& column_of_row);

}  // namespace mucf

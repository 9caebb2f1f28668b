#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mucf/schedulers.hpp"

namespace mucf {

namespace {

struct TightGraph {
  int m;
  const std::vector<char>& edges;

  bool tight(int i, int j) const { return edges[static_cast<std::size_t>(i) * m + j] != 0; }
};

// Alternating-path search used by the lexicographic refinement. Re-matches
// `row` to some free column, ending at `target`.
bool reroute(int row, int target, const TightGraph& g, const std::vector<char>& blocked,
             std::vector<char>& visited, std::vector<int>& col_of, std::vector<int>& row_of) {
  for (int c = 0; c < g.m; ++c) {
    if (visited[c] || blocked[c] || !g.tight(row, c)) continue;
    visited[c] = 1;
    if (c == target || reroute(row_of[c], target, g, blocked, visited, col_of, row_of)) {
      col_of[row] = c;
      row_of[c] = row;
      return true;
    }
  }
  return false;
}

// Hungarian method (shortest augmenting paths with potentials) on a
// non-negative cost matrix. Returns the column of each row and leaves the
// optimal dual in (u, v), 1-based as in the classical formulation.
std::vector<int> hungarian(int m, const std::vector<double>& cost, std::vector<double>& u,
                           std::vector<double>& v) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  u.assign(m + 1, 0.0);
  v.assign(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= m; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of(m);
  for (int j = 1; j <= m; ++j) col_of[p[j] - 1] = j - 1;
  return col_of;
}

void mark_tight(int m, const std::vector<double>& cost, const std::vector<double>& u,
                const std::vector<double>& v, double eps, std::vector<char>& tight) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * m + j;
      if (std::abs(cost[k] - u[i + 1] - v[j + 1]) > eps) tight[k] = 0;
    }
  }
}

}  // namespace

AssignmentResult solve_max_assignment(int ports, std::span<const double> weights,
                                      std::span<const std::uint8_t> occupied) {
  const int m = ports;
  if (m < 1) throw std::invalid_argument("solve_max_assignment: need at least one port");
  const std::size_t cells = static_cast<std::size_t>(m) * m;
  if (weights.size() != cells) {
    throw std::invalid_argument("solve_max_assignment: weight matrix must be M x M");
  }
  if (!occupied.empty() && occupied.size() != cells) {
    throw std::invalid_argument("solve_max_assignment: occupancy mask must be M x M");
  }

  // Shift by the common constant max(w) so costs are non-negative; the argmax
  // over perfect matchings is unchanged because each uses exactly M entries.
  const double w_max = *std::max_element(weights.begin(), weights.end());
  std::vector<double> cost(cells);
  double scale = 1.0;
  for (std::size_t k = 0; k < cells; ++k) {
    if (!std::isfinite(weights[k])) throw std::invalid_argument("non-finite weight");
    cost[k] = w_max - weights[k];
    scale = std::max(scale, cost[k]);
  }

  std::vector<double> u, v;
  std::vector<int> col_of = hungarian(m, cost, u, v);

  // Every optimal matching lives on the tight edges of an optimal dual, so
  // the tie-breaks below are searches inside that subgraph.
  std::vector<char> tight(cells, 1);
  mark_tight(m, cost, u, v, 1e-9 * scale, tight);

  if (!occupied.empty()) {
    // Second pass: among the optimal matchings, serve as many occupied
    // queues as possible. Costs are small integers, so this pass is exact.
    const double forbidden = static_cast<double>(m) + 2.0;
    std::vector<double> cost2(cells);
    for (std::size_t k = 0; k < cells; ++k) cost2[k] = tight[k] ? (occupied[k] ? 0.0 : 1.0) : forbidden;
    col_of = hungarian(m, cost2, u, v);
    mark_tight(m, cost2, u, v, 1e-9, tight);
  }

  std::vector<int> row_of(m);
  for (int i = 0; i < m; ++i) row_of[col_of[i]] = i;
  TightGraph g{m, tight};

  std::vector<char> blocked(m, 0), visited(m, 0);
  for (int i = 0; i < m; ++i) {
    for (int j = m - 1; j > col_of[i]; --j) {
      if (blocked[j] || !g.tight(i, j)) continue;
      const int target = col_of[i];
      const int displaced = row_of[j];
      std::vector<int> trial_col = col_of, trial_row = row_of;
      blocked[j] = 1;
      std::fill(visited.begin(), visited.end(), 0);
      const bool ok = reroute(displaced, target, g, blocked, visited, trial_col, trial_row);
      blocked[j] = 0;
      if (ok) {
        trial_col[i] = j;
        trial_row[j] = i;
        col_of = std::move(trial_col);
        row_of = std::move(trial_row);
        break;
      }
    }
    blocked[col_of[i]] = 1;
  }

  AssignmentResult result;
  result.column_of_row = std::move(col_of);
  for (int i = 0; i < m; ++i) {
    result.value += weights[static_cast<std::size_t>(i) * m + result.column_of_row[i]];
  }
  return result;
}

}  // namespace mucf

#pragma once

// Reference computations used only by tests. Each one takes a deliberately
// naive route (full enumeration, direct pairwise comparison) so it shares no
// code path with the library routine it checks.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

/// Best perfect matching by enumerating all M! column permutations. Among
/// equal values it keeps the lexicographically smallest bit-vector, where the
/// bit of (i, j) sits at index i*M + j.
struct MatchingAnswer {
  double value = -std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> bits;
};

inline std::vector<std::uint8_t> matching_bits(int m, const std::vector<int>& col_of_row) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(m) * m, 0);
  for (int i = 0; i < m; ++i) bits[static_cast<std::size_t>(i) * m + col_of_row[i]] = 1;
  return bits;
}

inline MatchingAnswer best_matching(int m, const std::vector<double>& w,
                                    const std::vector<std::uint8_t>& occupied = {}) {
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  MatchingAnswer best;
  int best_served = -1;
  do {
    double value = 0.0;
    int served = 0;
    for (int i = 0; i < m; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) * m + perm[i];
      value += w[k];
      if (!occupied.empty()) served += occupied[k];
    }
    auto bits = matching_bits(m, perm);
    const bool better = value > best.value ||
                        (value == best.value && served > best_served) ||
                        (value == best.value && served == best_served && bits < best.bits);
    if (better) {
      best.value = value;
      best.bits = std::move(bits);
      best_served = served;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Vote matrix as plain rows: votes[m][c].
using Votes = std::vector<std::vector<int>>;

/// Pareto relation: nobody prefers b to a and someone prefers a to b.
inline bool pareto_dominates(const Votes& v, int a, int b) {
  bool strict = false;
  for (const auto& row : v) {
    if (row[b] > row[a]) return false;
    if (row[a] > row[b]) strict = true;
  }
  return strict;
}

/// Pairwise verdict the postulates force on (a, b): shifting a voter's values
/// for both candidates by one constant cannot matter, so only the per-voter
/// differences a_ma - a_mb count, and anonymity makes their total decisive.
inline int pairwise_verdict(const Votes& v, int a, int b) {
  long total = 0;
  for (const auto& row : v) total += row[a] - row[b];
  return total > 0 ? 1 : (total < 0 ? -1 : 0);
}

/// All rankings (best first) that respect Pareto dominance and every
/// pairwise verdict. With distinct net scores exactly one survives.
inline std::vector<std::vector<int>> consistent_rankings(const Votes& v) {
  const int c = v.empty() ? 0 : static_cast<int>(v.front().size());
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    bool ok = true;
    for (int x = 0; x < c && ok; ++x) {
      for (int y = x + 1; y < c && ok; ++y) {
        const int hi = order[x], lo = order[y];
        if (pareto_dominates(v, lo, hi)) ok = false;
        if (pairwise_verdict(v, lo, hi) > 0) ok = false;
      }
    }
    if (ok) out.push_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

/// All independent sets of a graph that are maximal under inclusion, by
/// checking every subset.
inline std::vector<std::vector<std::uint8_t>> maximal_independent_sets(
    int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<std::uint8_t>> out;
  const auto independent = [&](std::uint32_t mask) {
    for (const auto& [a, b] : edges) {
      if ((mask >> a & 1u) && (mask >> b & 1u)) return false;
    }
    return true;
  };
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (!independent(mask)) continue;
    bool maximal = true;
    for (int k = 0; k < n && maximal; ++k) {
      if (!(mask >> k & 1u) && independent(mask | (1u << k))) maximal = false;
    }
    if (!maximal) continue;
    std::vector<std::uint8_t> bits(n);
    for (int k = 0; k < n; ++k) bits[k] = static_cast<std::uint8_t>(mask >> k & 1u);
    out.push_back(std::move(bits));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle

#include "mucf/lp.hpp"

#include <cmath>
#include <stdexcept>

namespace mucf {

LpResult solve_packing_lp(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                          const std::vector<double>& c) {
  const std::size_t rows = a.size();
  const std::size_t vars = c.size();
  if (b.size() != rows) throw std::invalid_argument("solve_packing_lp: |b| != rows of A");
  for (const auto& row : a) {
    if (row.size() != vars) throw std::invalid_argument("solve_packing_lp: ragged A");
  }
  for (double bi : b) {
    if (bi < 0) throw std::invalid_argument("solve_packing_lp: b must be non-negative");
  }

  // Tableau columns: [vars | slacks | rhs]; last row is the objective z - c.y.
  const std::size_t cols = vars + rows + 1;
  const std::size_t rhs = cols - 1;
  std::vector<std::vector<double>> t(rows + 1, std::vector<double>(cols, 0.0));
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < vars; ++j) t[i][j] = a[i][j];
    t[i][vars + i] = 1.0;
    t[i][rhs] = b[i];
    basis[i] = vars + i;
  }
  for (std::size_t j = 0; j < vars; ++j) t[rows][j] = -c[j];

  constexpr double kEps = 1e-12;
  LpResult result;
  for (;;) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j < rhs; ++j) {
      if (t[rows][j] < -kEps) {
        enter = j;
        break;
      }
    }
    if (enter == cols) break;

    std::size_t leave = rows;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (t[i][enter] <= kEps) continue;
      const double ratio = t[i][rhs] / t[i][enter];
      if (leave == rows || ratio < best_ratio - kEps ||
          (std::abs(ratio - best_ratio) <= kEps && basis[i] < basis[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    if (leave == rows) {
      result.status = LpResult::Status::Unbounded;
      result.value = INFINITY;
      return result;
    }

    const double pivot = t[leave][enter];
    for (double& x : t[leave]) x /= pivot;
    for (std::size_t i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const double factor = t[i][enter];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) t[i][j] -= factor * t[leave][j];
    }
    basis[leave] = enter;
  }

  result.value = t[rows][rhs];
  result.primal.assign(vars, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (basis[i] < vars) result.primal[basis[i]] = t[i][rhs];
  }
  result.dual.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) result.dual[i] = t[rows][vars + i];
  return result;
}

}  // namespace mucf

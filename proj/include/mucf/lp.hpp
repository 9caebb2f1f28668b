#pragma once

#include <vector>

namespace mucf {

/// Dense simplex for  max c.y  s.t.  A y <= b, y >= 0  with b >= 0, so the
/// origin is a feasible start. Bland's rule; intended for the small programs
/// built from an enumerated S_max.
struct LpResult {
  enum class Status { Optimal, Unbounded };

  Status status = Status::Optimal;
  double value = 0.0;
  std::vector<double> primal;  // y
  std::vector<double> dual;    // one multiplier per constraint row
};

LpResult solve_packing_lp(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                          const std::vector<double>& c);

}  // namespace mucf

#include "mtmc/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "mtmc/error.hpp"

namespace mtmc {

std::vector<int> solve_assignment(const CostMatrix& cost) {
  const int rows = static_cast<int>(cost.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(cost.front().size());
  double max_allowed = 0.0;
  for (const auto& row : cost) {
    if (static_cast<int>(row.size()) != cols) throw InputError("ragged cost matrix");
    for (double c : row) {
      if (c == kForbidden) continue;
      if (!std::isfinite(c) || c < 0.0) throw InputError("cost must be finite and >= 0");
      max_allowed = std::max(max_allowed, c);
    }
  }

  // Padding and forbidden cells share one penalty larger than any sum of
  // allowed costs, so the optimum first maximises the number of allowed
  // pairs and only then minimises their total cost.
  const int n = std::max(rows, cols);
  const double penalty = (max_allowed + 1.0) * (n + 1);
  auto at = [&](int i, int j) {
    if (i >= rows || j >= cols) return penalty;
    const double c = cost[i][j];
    return c == kForbidden ? penalty : c;
  };

  // Shortest augmenting path with potentials, 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), INFINITY);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = INFINITY;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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

  std::vector<int> result(rows, -1);
  for (int j = 1; j <= n; ++j) {
    const int i = p[j] - 1;
    const int c = j - 1;
    if (i < rows && c < cols && cost[i][c] != kForbidden) result[i] = c;
  }
  return result;
}

}  // namespace mtmc

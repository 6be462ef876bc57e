#pragma once

// Minimum-cost perfect assignment (Hungarian method with potentials,
// O(n^3)). With uniform marginals the unregularized transport optimum is
// a permutation scaled by 1/n, so this gives the exact LP value.

#include "igt/core.hpp"

#include <limits>
#include <vector>

namespace igt {

struct AssignmentResult {
  std::vector<int> column_of_row;
  double cost = 0.0;
};

inline AssignmentResult min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n == 0) {
    throw Error(ErrorKind::kInvalidArgument, "assignment needs a non-empty square matrix");
  }
  if (!cost.allFinite()) throw Error(ErrorKind::kInvalidArgument, "assignment costs must be finite");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; row 0 / column 0 are sentinels.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
  AssignmentResult r;
  r.column_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) r.column_of_row[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  for (int i = 0; i < n; ++i) r.cost += cost(i, r.column_of_row[static_cast<std::size_t>(i)]);
  return r;
}

}  // namespace igt

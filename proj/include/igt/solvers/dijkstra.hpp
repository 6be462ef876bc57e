#pragma once

// Shortest paths on 4-connected cost grids with node-cost semantics: a path
// pays the cost of every cell it enters, the start cell is free.

#include "igt/core.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

namespace igt {

struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct GridPath {
  std::vector<GridCell> cells;  // start ... goal
  double cost = 0.0;

  /// 0/1 indicator over entered cells (start excluded), row-major.
  Vector indicator(Index rows, Index cols) const {
    Vector y = Vector::Zero(rows * cols);
    for (std::size_t k = 1; k < cells.size(); ++k) y(cells[k].row * cols + cells[k].col) = 1.0;
    return y;
  }
};

/// Ties are broken lexicographically on (distance, row, column) so results
/// are identical across platforms.
inline GridPath dijkstra_grid(const Matrix& costs, GridCell start, GridCell goal) {
  const int rows = static_cast<int>(costs.rows());
  const int cols = static_cast<int>(costs.cols());
  auto inside = [&](GridCell c) { return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols; };
  if (!inside(start) || !inside(goal)) {
    throw Error(ErrorKind::kInvalidArgument, "start/goal outside the grid");
  }
  if (start == goal) throw Error(ErrorKind::kInvalidArgument, "start equals goal");
  if (!(costs.array() > 0.0).all() || !costs.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "grid costs must be finite and positive");
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(rows * cols), inf);
  std::vector<int> parent(dist.size(), -1);
  std::vector<char> done(dist.size(), 0);
  auto id = [cols](int r, int c) { return r * cols + c; };

  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[id(start.row, start.col)] = 0.0;
  open.emplace(0.0, start.row, start.col);

  constexpr int kDr[4] = {-1, 0, 0, 1};
  constexpr int kDc[4] = {0, -1, 1, 0};
  while (!open.empty()) {
    const auto [d, r, c] = open.top();
    open.pop();
    const int u = id(r, c);
    if (done[u]) continue;
    done[u] = 1;
    if (r == goal.row && c == goal.col) break;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + kDr[k];
      const int nc = c + kDc[k];
      if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
      const int v = id(nr, nc);
      if (done[v]) continue;
      const double nd = d + costs(nr, nc);
      if (nd < dist[v]) {
        dist[v] = nd;
        parent[v] = u;
        open.emplace(nd, nr, nc);
      }
    }
  }

  const int g = id(goal.row, goal.col);
  if (!std::isfinite(dist[g])) throw Error(ErrorKind::kNoPath, "goal unreachable");

  GridPath path;
  path.cost = dist[g];
  for (int v = g; v != -1; v = parent[v]) path.cells.push_back({v / cols, v % cols});
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace igt

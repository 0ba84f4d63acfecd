#include "eend/assignment.hpp"

#include <algorithm>
#include <limits>

namespace eend {

std::vector<std::size_t> solve_assignment_min(const Tensor& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n == 0) return {};
  if (n > m) throw DimensionError("solve_assignment_min: more rows than columns");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual row/column 0, classic potentials formulation.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0);  // match[j] = row assigned to column j
  std::vector<std::size_t> way(m + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = match[j0], j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> result(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (match[j] != 0) result[match[j] - 1] = j - 1;
  return result;
}

std::vector<std::size_t> solve_assignment_max(const Tensor& score) {
  const std::size_t n = score.rows();
  const std::size_t m = score.cols();
  if (n == 0) return {};

  // Negate and pad to a wide rectangle so every (possibly excess) row can be
  // parked on a zero-cost dummy column.
  const std::size_t wide = m + n;
  Tensor cost(n, wide);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) cost.at(i, j) = -score.at(i, j);
  auto assign = solve_assignment_min(cost);
  std::vector<std::size_t> result(n, kNoMatch);
  for (std::size_t i = 0; i < n; ++i)
    if (assign[i] < m) result[i] = assign[i];
  return result;
}

}  // namespace eend

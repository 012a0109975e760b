#include "hoptrace/assignment.hpp"

#include <algorithm>
#include <limits>

#include "hoptrace/error.hpp"

namespace hoptrace {

Assignment max_weight_matching(const WeightMatrix& weights) {
  const std::size_t rows = weights.size();
  const std::size_t cols = rows == 0 ? 0 : weights.front().size();
  for (const auto& r : weights) {
    if (r.size() != cols) throw Error(ErrorCode::kInvalidArgument, "ragged weight matrix");
  }
  Assignment out;
  out.row_to_col.assign(rows, -1);
  if (rows == 0 || cols == 0) return out;

  const std::size_t n = std::max(rows, cols);
  auto cost = [&](std::size_t i, std::size_t j) -> double {
    // 1-based indices into the padded square matrix.
    if (i > rows || j > cols) return 0.0;
    return -std::max(weights[i - 1][j - 1], 0.0);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0);  // match[col] = row
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= cols; ++j) {
    const std::size_t i = match[j];
    if (i >= 1 && i <= rows && weights[i - 1][j - 1] > 0.0) {
      out.row_to_col[i - 1] = static_cast<int>(j - 1);
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (out.row_to_col[i] >= 0) out.total_weight += weights[i][static_cast<std::size_t>(out.row_to_col[i])];
  }
  return out;
}

}  // namespace hoptrace

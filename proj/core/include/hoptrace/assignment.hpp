#pragma once

#include <vector>

namespace hoptrace {

using WeightMatrix = std::vector<std::vector<double>>;

struct Assignment {
  std::vector<int> row_to_col;  // -1 for unmatched rows
  double total_weight = 0.0;    // sum of matched weights, summed in row order
};

/// Maximum-weight bipartite matching on a rows x cols matrix (rectangular
/// allowed; all rows must have equal length). Solved as a min-cost assignment
/// on the square matrix padded with zero-weight dummies, O(n^3) with
/// potentials. Pairs whose weight is not positive are never reported, which
/// makes the result a maximum-weight (not necessarily perfect) matching.
Assignment max_weight_matching(const WeightMatrix& weights);

}  // namespace hoptrace

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace goalgauge {

// Alignment of two clusterings of the same sample ids. `raw` is the
// co-occurrence matrix in ascending cluster-id order; `aligned` is the same
// matrix with rows and columns permuted by the greedy alignment, whose order
// is reported as original cluster ids in `row_order` / `col_order`. `trace`
// sums the aligned diagonal, i.e. the samples the alignment explains.
struct StabilityResult {
  std::vector<std::vector<std::int64_t>> raw;
  std::vector<std::vector<std::int64_t>> aligned;
  std::vector<int> row_order;
  std::vector<int> col_order;
  std::int64_t trace = 0;
  double ari = 0.0;
};

// Greedy largest-first alignment: repeatedly take the largest remaining cell
// (ties to the lowest row, then column), pairing its row and column. Leftover
// rows and columns follow in ascending id order. Throws when the two
// assignment maps cover different id sets.
StabilityResult stability_matrix(const std::map<std::string, int>& a,
                                 const std::map<std::string, int>& b);

// Adjusted Rand index over two assignments of the same ids. A degenerate
// comparison (zero denominator, e.g. both clusterings trivial) scores 1.0.
double adjusted_rand_index(const std::map<std::string, int>& a,
                           const std::map<std::string, int>& b);

}  // namespace goalgauge

#include "goalgauge/stability.hpp"

#include <algorithm>
#include <set>

#include "goalgauge/errors.hpp"

namespace goalgauge {

namespace {

std::vector<int> sorted_cluster_ids(const std::map<std::string, int>& labels) {
  std::set<int> ids;
  for (const auto& [_, cluster] : labels) ids.insert(cluster);
  return {ids.begin(), ids.end()};
}

int dense_index(const std::vector<int>& ids, int id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  return static_cast<int>(it - ids.begin());
}

std::vector<std::vector<std::int64_t>> co_occurrence(
    const std::map<std::string, int>& a, const std::map<std::string, int>& b,
    const std::vector<int>& row_ids, const std::vector<int>& col_ids) {
  if (a.size() != b.size()) {
    throw Error("stability: assignment id sets differ");
  }
  std::vector<std::vector<std::int64_t>> counts(
      row_ids.size(), std::vector<std::int64_t>(col_ids.size(), 0));
  for (const auto& [id, cluster_a] : a) {
    auto it = b.find(id);
    if (it == b.end()) {
      throw Error("stability: assignment id sets differ");
    }
    ++counts[static_cast<std::size_t>(dense_index(row_ids, cluster_a))]
            [static_cast<std::size_t>(dense_index(col_ids, it->second))];
  }
  return counts;
}

std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

}  // namespace

StabilityResult stability_matrix(const std::map<std::string, int>& a,
                                 const std::map<std::string, int>& b) {
  std::vector<int> row_ids = sorted_cluster_ids(a);
  std::vector<int> col_ids = sorted_cluster_ids(b);
  StabilityResult result;
  result.raw = co_occurrence(a, b, row_ids, col_ids);

  std::size_t rows = row_ids.size();
  std::size_t cols = col_ids.size();
  std::vector<char> row_used(rows, 0);
  std::vector<char> col_used(cols, 0);
  std::vector<std::size_t> row_perm;
  std::vector<std::size_t> col_perm;
  std::size_t matched = std::min(rows, cols);
  for (std::size_t step = 0; step < matched; ++step) {
    std::size_t best_i = 0;
    std::size_t best_j = 0;
    std::int64_t best = -1;
    for (std::size_t i = 0; i < rows; ++i) {
      if (row_used[i]) continue;
      for (std::size_t j = 0; j < cols; ++j) {
        if (col_used[j]) continue;
        if (result.raw[i][j] > best) {
          best = result.raw[i][j];
          best_i = i;
          best_j = j;
        }
      }
    }
    row_used[best_i] = 1;
    col_used[best_j] = 1;
    row_perm.push_back(best_i);
    col_perm.push_back(best_j);
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (!row_used[i]) row_perm.push_back(i);
  }
  for (std::size_t j = 0; j < cols; ++j) {
    if (!col_used[j]) col_perm.push_back(j);
  }

  result.aligned.assign(rows, std::vector<std::int64_t>(cols, 0));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      result.aligned[i][j] = result.raw[row_perm[i]][col_perm[j]];
    }
  }
  for (std::size_t i : row_perm) {
    result.row_order.push_back(row_ids[i]);
  }
  for (std::size_t j : col_perm) {
    result.col_order.push_back(col_ids[j]);
  }
  for (std::size_t d = 0; d < matched; ++d) {
    result.trace += result.aligned[d][d];
  }
  result.ari = adjusted_rand_index(a, b);
  return result;
}

double adjusted_rand_index(const std::map<std::string, int>& a,
                           const std::map<std::string, int>& b) {
  std::vector<int> row_ids = sorted_cluster_ids(a);
  std::vector<int> col_ids = sorted_cluster_ids(b);
  std::vector<std::vector<std::int64_t>> counts =
      co_occurrence(a, b, row_ids, col_ids);

  std::int64_t n = static_cast<std::int64_t>(a.size());
  std::int64_t index = 0;
  std::int64_t row_pairs = 0;
  std::int64_t col_pairs = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t row_sum = 0;
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      index += pairs(counts[i][j]);
      row_sum += counts[i][j];
    }
    row_pairs += pairs(row_sum);
  }
  for (std::size_t j = 0; !counts.empty() && j < counts[0].size(); ++j) {
    std::int64_t col_sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) col_sum += counts[i][j];
    col_pairs += pairs(col_sum);
  }

  double total_pairs = static_cast<double>(pairs(n));
  if (total_pairs == 0.0) return 1.0;
  double expected = static_cast<double>(row_pairs) *
                    static_cast<double>(col_pairs) / total_pairs;
  double maximum =
      (static_cast<double>(row_pairs) + static_cast<double>(col_pairs)) / 2.0;
  double denom = maximum - expected;
  if (denom == 0.0) return 1.0;
  return (static_cast<double>(index) - expected) / denom;
}

}  // namespace goalgauge

#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "goalgauge/errors.hpp"
#include "goalgauge/rng.hpp"
#include "goalgauge/stability.hpp"

using namespace goalgauge;

namespace {

std::map<std::string, int> assignment(const std::vector<int>& labels) {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out["id" + std::to_string(i)] = labels[i];
  }
  return out;
}

// Co-occurrence counts in ascending cluster-id order, matching the layout
// stability_matrix documents for `raw`.
std::vector<std::vector<std::int64_t>> co_occurrence(
    const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
  std::map<int, std::size_t> rows;
  std::map<int, std::size_t> cols;
  for (const auto& [id, cluster] : a) rows.emplace(cluster, 0);
  for (const auto& [id, cluster] : b) cols.emplace(cluster, 0);
  std::size_t r = 0;
  for (auto& [cluster, index] : rows) index = r++;
  std::size_t c = 0;
  for (auto& [cluster, index] : cols) index = c++;
  std::vector<std::vector<std::int64_t>> counts(
      rows.size(), std::vector<std::int64_t>(cols.size(), 0));
  for (const auto& [id, cluster] : a) {
    counts[rows.at(cluster)][cols.at(b.at(id))] += 1;
  }
  return counts;
}

// Best achievable aligned trace over all row-to-column pairings of a square
// matrix, by exhausting column permutations.
std::int64_t optimal_trace(
    const std::vector<std::vector<std::int64_t>>& counts) {
  std::vector<std::size_t> perm(counts.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t best = 0;
  do {
    std::int64_t trace = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) trace += counts[i][perm[i]];
    best = std::max(best, trace);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("self alignment is exactly diagonal") {
  auto a = assignment({0, 0, 1, 1, 1, 2});
  StabilityResult result = stability_matrix(a, a);

  REQUIRE(result.aligned.size() == 3);
  REQUIRE(result.aligned[0].size() == 3);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < result.aligned.size(); ++i) {
    for (std::size_t j = 0; j < result.aligned[i].size(); ++j) {
      if (i != j) CHECK(result.aligned[i][j] == 0);
      if (i == j) total += result.aligned[i][j];
    }
  }
  CHECK(total == 6);
  CHECK(result.trace == 6);
  CHECK(result.ari == 1.0);
  // Largest cluster first: sizes 3, 2, 1 live in clusters 1, 0, 2.
  CHECK(result.row_order == std::vector<int>{1, 0, 2});
  CHECK(result.col_order == std::vector<int>{1, 0, 2});
}

TEST_CASE("stability matrix on a hand example") {
  // a: {x,y} {z,w,v}; b: {x} {y,z,w,v}
  std::map<std::string, int> a = {
      {"x", 0}, {"y", 0}, {"z", 1}, {"w", 1}, {"v", 1}};
  std::map<std::string, int> b = {
      {"x", 0}, {"y", 1}, {"z", 1}, {"w", 1}, {"v", 1}};
  StabilityResult result = stability_matrix(a, b);

  REQUIRE(result.raw.size() == 2);
  CHECK(result.raw[0] == std::vector<std::int64_t>{1, 1});
  CHECK(result.raw[1] == std::vector<std::int64_t>{0, 3});

  CHECK(result.row_order == std::vector<int>{1, 0});
  CHECK(result.col_order == std::vector<int>{1, 0});
  CHECK(result.aligned[0] == std::vector<std::int64_t>{3, 0});
  CHECK(result.aligned[1] == std::vector<std::int64_t>{1, 1});
  CHECK(result.trace == 4);
}

TEST_CASE("greedy alignment ties go to the lowest row then column") {
  // Swapped labels: raw is anti-diagonal with equal cells.
  std::map<std::string, int> a = {{"x", 0}, {"y", 1}};
  std::map<std::string, int> b = {{"x", 1}, {"y", 0}};
  StabilityResult result = stability_matrix(a, b);

  CHECK(result.raw[0] == std::vector<std::int64_t>{0, 1});
  CHECK(result.raw[1] == std::vector<std::int64_t>{1, 0});
  CHECK(result.row_order == std::vector<int>{0, 1});
  CHECK(result.col_order == std::vector<int>{1, 0});
  CHECK(result.trace == 2);
  CHECK(result.ari == 1.0);
}

TEST_CASE("rectangular alignments append leftover rows in id order") {
  std::map<std::string, int> a = {{"x", 5}, {"y", 9}};
  std::map<std::string, int> b = {{"x", 0}, {"y", 0}};
  StabilityResult result = stability_matrix(a, b);

  REQUIRE(result.raw.size() == 2);
  REQUIRE(result.raw[0].size() == 1);
  CHECK(result.raw[0][0] == 1);
  CHECK(result.raw[1][0] == 1);
  CHECK(result.row_order == std::vector<int>{5, 9});
  CHECK(result.col_order == std::vector<int>{0});
  CHECK(result.trace == 1);
  CHECK(result.ari == 0.0);
}

TEST_CASE("stability matrix requires matching id sets") {
  std::map<std::string, int> a = {{"x", 0}, {"y", 1}};
  std::map<std::string, int> b = {{"x", 0}, {"z", 1}};
  CHECK_THROWS_WITH_AS(stability_matrix(a, b),
                       doctest::Contains("id sets differ"), Error);
  b = {{"x", 0}};
  CHECK_THROWS_WITH_AS(stability_matrix(a, b),
                       doctest::Contains("id sets differ"), Error);
}

TEST_CASE("greedy alignment tracks the brute-force optimum") {
  // Random four-cluster pairs; the greedy trace may fall short of the best
  // permutation but never beats it, and stays within the 1/2 bound greedy
  // matching guarantees.
  Rng rng(2024);
  std::int64_t total_shortfall = 0;
  for (int instance = 0; instance < 20; ++instance) {
    CAPTURE(instance);
    std::vector<int> a_labels;
    std::vector<int> b_labels;
    // Seed the first four ids so both sides keep exactly four clusters.
    for (int c = 0; c < 4; ++c) {
      a_labels.push_back(c);
      b_labels.push_back(c);
    }
    for (int i = 0; i < 26; ++i) {
      a_labels.push_back(rng.uniform_int(0, 3));
      b_labels.push_back(rng.uniform_int(0, 3));
    }
    auto a = assignment(a_labels);
    auto b = assignment(b_labels);

    StabilityResult result = stability_matrix(a, b);
    auto counts = co_occurrence(a, b);
    CHECK(result.raw == counts);

    std::int64_t best = optimal_trace(counts);
    CHECK(result.trace <= best);
    CHECK(result.trace * 2 >= best);
    total_shortfall += best - result.trace;

    // The aligned matrix is the raw matrix under the reported permutation.
    REQUIRE(result.row_order.size() == 4);
    REQUIRE(result.col_order.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        std::size_t raw_r = static_cast<std::size_t>(result.row_order[r]);
        std::size_t raw_c = static_cast<std::size_t>(result.col_order[c]);
        CHECK(result.aligned[r][c] == counts[raw_r][raw_c]);
      }
    }
  }
  CHECK(total_shortfall >= 0);
}

TEST_CASE("adjusted rand index closed forms") {
  SUBCASE("partial agreement") {
    auto a = assignment({0, 0, 1, 1, 1});
    auto b = assignment({0, 0, 1, 1, 2});
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(6.0 / 11.0)
                                           .epsilon(1e-12));
  }
  SUBCASE("identical partitions under relabeling") {
    auto a = assignment({0, 0, 1, 1, 2, 2});
    auto b = assignment({5, 5, 3, 3, 4, 4});
    CHECK(adjusted_rand_index(a, b) == 1.0);
  }
  SUBCASE("systematic disagreement goes negative") {
    auto a = assignment({0, 0, 1, 1});
    auto b = assignment({0, 1, 0, 1});
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("degenerate comparisons score one") {
    auto a = assignment({0, 0, 0});
    auto b = assignment({7, 7, 7});
    CHECK(adjusted_rand_index(a, b) == 1.0);
    auto singletons_a = assignment({0, 1, 2});
    auto singletons_b = assignment({2, 0, 1});
    CHECK(adjusted_rand_index(singletons_a, singletons_b) == 1.0);
    CHECK(adjusted_rand_index(assignment({0}), assignment({3})) == 1.0);
  }
  SUBCASE("symmetry") {
    auto a = assignment({0, 0, 1, 1, 1});
    auto b = assignment({0, 0, 1, 1, 2});
    CHECK(adjusted_rand_index(a, b) == adjusted_rand_index(b, a));
  }
  SUBCASE("mismatched ids throw") {
    CHECK_THROWS_AS(adjusted_rand_index(assignment({0, 1}), assignment({0})),
                    Error);
  }
}

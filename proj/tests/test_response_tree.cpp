#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "goalgauge/errors.hpp"
#include "goalgauge/gateway.hpp"
#include "goalgauge/mock_backend.hpp"
#include "goalgauge/response_tree.hpp"
#include "goalgauge/rng.hpp"
#include "test_support.hpp"
#include "tree_reference.hpp"

using namespace goalgauge;

namespace {

using tree_reference::leaf_path_set;
using tree_reference::oracle_leaves;
using tree_reference::OracleLeaf;
using tree_reference::random_table;
using tree_reference::TokenPath;
using tree_reference::tree_leaf_mass;
using tree_reference::tree_leaf_set;

const char kPrompt[] = "Q:";

ModelEndpoint tree_endpoint(int max_tokens, int top_k = 5) {
  ModelEndpoint endpoint =
      test_support::mock_endpoint(EndpointKind::completion);
  endpoint.params.max_output_tokens = max_tokens;
  endpoint.params.top_k_logprobs = top_k;
  return endpoint;
}

TreeConfig tree_config(TreeMode mode, double alpha, int max_tokens = 8,
                       int node_budget = 100000) {
  TreeConfig config;
  config.alpha = alpha;
  config.mode = mode;
  config.node_budget = node_budget;
  config.endpoint = tree_endpoint(max_tokens);
  return config;
}

}  // namespace

TEST_CASE("tree mode names round trip") {
  CHECK(tree_mode_name(TreeMode::per_token) == "per_token");
  CHECK(tree_mode_name(TreeMode::path_mass) == "path_mass");
  CHECK(tree_mode_from_name("per_token") == TreeMode::per_token);
  CHECK(tree_mode_from_name("path_mass") == TreeMode::path_mass);
  CHECK_THROWS_WITH_AS(tree_mode_from_name("windowed"),
                       doctest::Contains("unknown tree mode"), Error);
}

TEST_CASE("build_tree validates its configuration") {
  auto backend = std::make_shared<MockBackend>();
  ModelGateway gateway(backend);
  CHECK_THROWS_WITH_AS(
      build_tree(gateway, tree_config(TreeMode::per_token, 0.0), kPrompt),
      doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(
      build_tree(gateway, tree_config(TreeMode::per_token, 1.5), kPrompt),
      doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(
      build_tree(gateway, tree_config(TreeMode::per_token, -0.2), kPrompt),
      doctest::Contains("alpha"), Error);
  CHECK_THROWS_WITH_AS(
      build_tree(gateway, tree_config(TreeMode::per_token, 0.5, 8, 0),
                 kPrompt),
      doctest::Contains("node_budget"), Error);
  CHECK_THROWS_WITH_AS(
      build_tree(gateway, tree_config(TreeMode::per_token, 0.5, 0), kPrompt),
      doctest::Contains("max_output_tokens"), Error);
}

TEST_CASE("random tables match the reference enumeration in both modes") {
  const std::vector<double> kAlphas = {0.05, 0.3, 0.7};
  for (int instance = 0; instance < 100; ++instance) {
    CAPTURE(instance);
    Rng rng(10000 + static_cast<std::uint64_t>(instance));
    ScriptedTable table = random_table(rng);
    auto backend = std::make_shared<MockBackend>();
    backend->set_completion_table(table);
    ModelGateway gateway(backend);

    // The full leaf set, reachable by any alpha at or below the smallest
    // leaf mass. Half of it sits below every per-token probability.
    std::vector<OracleLeaf> everything =
        oracle_leaves(table, TreeMode::per_token, 0.0);
    double min_mass = 1.0;
    for (const auto& leaf : everything) {
      min_mass = std::min(min_mass, std::exp(leaf.path_logprob));
    }
    double alpha_small = min_mass / 2.0;
    REQUIRE(alpha_small > 0.0);

    for (TreeMode mode : {TreeMode::per_token, TreeMode::path_mass}) {
      CAPTURE(tree_mode_name(mode));
      std::map<double, std::set<TokenPath>> by_alpha;
      for (double alpha : kAlphas) {
        CAPTURE(alpha);
        ResponseTree tree =
            build_tree(gateway, tree_config(mode, alpha), kPrompt);
        std::vector<OracleLeaf> expected = oracle_leaves(table, mode, alpha);

        std::set<TokenPath> got = tree_leaf_set(tree);
        CHECK(got == leaf_path_set(expected));
        CHECK(tree.leaf_count == static_cast<int>(expected.size()));
        CHECK_FALSE(tree.budget_exhausted);
        bool any_cut = false;
        for (const TreeNode& node : tree.nodes) any_cut |= node.cut;
        CHECK_FALSE(any_cut);

        double mass = tree_leaf_mass(tree);
        CHECK(mass <= 1.0 + 1e-6);

        double best = -std::numeric_limits<double>::infinity();
        for (const auto& leaf : expected) {
          best = std::max(best, leaf.path_logprob);
        }
        if (!expected.empty()) {
          CHECK(tree.max_branch_logprob ==
                doctest::Approx(best).epsilon(1e-12));
        } else {
          CHECK(tree.leaf_count == 0);
        }
        by_alpha[alpha] = std::move(got);
      }

      // Raising alpha can only remove leaves.
      auto contains = [](const std::set<TokenPath>& big,
                         const std::set<TokenPath>& small) {
        return std::includes(big.begin(), big.end(), small.begin(),
                             small.end());
      };
      CHECK(contains(by_alpha[0.05], by_alpha[0.3]));
      CHECK(contains(by_alpha[0.3], by_alpha[0.7]));
      CHECK(contains(by_alpha[0.05], by_alpha[0.7]));

      // Below the minimum per-token probability nothing is pruned and the
      // leaves carry the whole distribution.
      ResponseTree complete =
          build_tree(gateway, tree_config(mode, alpha_small), kPrompt);
      CHECK(tree_leaf_set(complete) == leaf_path_set(everything));
      CHECK(tree_leaf_mass(complete) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("tree structure invariants and determinism") {
  Rng rng(424242);
  ScriptedTable table = random_table(rng);
  auto build_once = [&] {
    auto backend = std::make_shared<MockBackend>();
    backend->set_completion_table(table);
    ModelGateway gateway(backend);
    return build_tree(gateway, tree_config(TreeMode::per_token, 0.1),
                      kPrompt);
  };
  ResponseTree tree = build_once();
  ResponseTree again = build_once();

  REQUIRE(tree.nodes.size() == again.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& a = tree.nodes[i];
    const TreeNode& b = again.nodes[i];
    CHECK(a.id == b.id);
    CHECK(a.parent == b.parent);
    CHECK(a.token == b.token);
    CHECK(a.token_logprob == b.token_logprob);
    CHECK(a.path_logprob == b.path_logprob);
    CHECK(a.children == b.children);
    CHECK(a.leaf == b.leaf);
    CHECK(a.cut == b.cut);
  }

  REQUIRE(!tree.nodes.empty());
  CHECK(tree.nodes[0].parent == -1);
  CHECK(tree.nodes[0].token.empty());
  CHECK(tree.root_prompt == kPrompt);
  for (const TreeNode& node : tree.nodes) {
    CHECK(node.id == &node - tree.nodes.data());
    if (node.id == 0) continue;
    CHECK(node.parent < node.id);
    const TreeNode& parent = tree.nodes[static_cast<std::size_t>(node.parent)];
    CHECK(std::find(parent.children.begin(), parent.children.end(),
                    node.id) != parent.children.end());
    CHECK(node.path_logprob == parent.path_logprob + node.token_logprob);
  }
  CHECK(static_cast<int>(tree.leaves().size()) == tree.leaf_count);
}

TEST_CASE("path_mass prunes chains that fall below alpha") {
  ScriptedTable table;
  table.states[{}] = {{" a1", 0.5}, {" b1", 0.5}};
  table.states[{" a1"}] = {{" c2", 0.4}, {" d2", 0.6}};
  table.states[{" b1"}] = {{" e2", 1.0}};
  table.states[{" a1", " c2"}] = {{" f3", 1.0}};
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(table);
  ModelGateway gateway(backend);

  SUBCASE("path_mass keeps only the surviving branch") {
    ResponseTree tree =
        build_tree(gateway, tree_config(TreeMode::path_mass, 0.35), kPrompt);
    CHECK(tree_leaf_set(tree) ==
          std::set<TokenPath>{TokenPath{" b1", " e2"}});
    // The dead " a1" chain is pruned and ids are compacted.
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].children == std::vector<int>{1});
    CHECK(tree.nodes[1].token == " b1");
    CHECK(tree.nodes[1].children == std::vector<int>{2});
    CHECK(tree.nodes[2].token == " e2");
    CHECK(tree.nodes[2].leaf);
    CHECK(tree.leaf_count == 1);
    CHECK(tree.max_branch_logprob ==
          doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }

  SUBCASE("per_token explores the same table much deeper") {
    ResponseTree tree =
        build_tree(gateway, tree_config(TreeMode::per_token, 0.35), kPrompt);
    CHECK(tree_leaf_set(tree) ==
          std::set<TokenPath>{TokenPath{" a1", " c2", " f3"},
                              TokenPath{" a1", " d2"},
                              TokenPath{" b1", " e2"}});
    CHECK(tree.leaf_count == 3);
  }
}

TEST_CASE("node budget converts pending work into cut leaves") {
  ScriptedTable table;
  table.states[{}] = {{" a1", 0.6}, {" b1", 0.4}};
  table.states[{" a1"}] = {{" c2", 1.0}};
  table.states[{" b1"}] = {{" e2", 1.0}};
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(table);
  ModelGateway gateway(backend);

  SUBCASE("budget runs out before the greedy step") {
    ResponseTree tree = build_tree(
        gateway, tree_config(TreeMode::per_token, 0.3, 8, 3), kPrompt);
    CHECK(tree.budget_exhausted);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[1].token == " a1");
    CHECK(tree.nodes[1].leaf);
    CHECK(tree.nodes[1].cut);
    // The queued " b1" branch drains without another model call.
    CHECK(tree.nodes[2].token == " b1");
    CHECK(tree.nodes[2].leaf);
    CHECK(tree.nodes[2].cut);
    CHECK(tree.leaf_count == 2);
    CHECK(backend->call_count() == 1);
    // No non-cut leaf: the branch logprob is empty in the record.
    TreeRecord record = make_tree_record(tree, "budgeted");
    CHECK_FALSE(record.max_branch_logprob.has_value());
    CHECK(record.budget_exhausted);
    CHECK(tree.leaf_token_paths(false).empty());
  }

  SUBCASE("budget runs out while adding alternatives") {
    ResponseTree tree = build_tree(
        gateway, tree_config(TreeMode::per_token, 0.3, 8, 2), kPrompt);
    CHECK(tree.budget_exhausted);
    REQUIRE(tree.nodes.size() == 2);
    CHECK(tree.nodes[1].token == " a1");
    CHECK(tree.nodes[1].cut);
    CHECK(tree.leaf_count == 1);
    CHECK(backend->call_count() == 1);
  }

  SUBCASE("a budget of one cuts the root itself") {
    ResponseTree tree = build_tree(
        gateway, tree_config(TreeMode::per_token, 0.3, 8, 1), kPrompt);
    CHECK(tree.budget_exhausted);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].leaf);
    CHECK(tree.nodes[0].cut);
  }
}

TEST_CASE("depth limits mark cut leaves") {
  SUBCASE("a rollout stopped by length ends in a cut leaf") {
    ScriptedTable table;
    table.states[{}] = {{" a1", 1.0}};
    table.states[{" a1"}] = {{" b2", 1.0}};
    table.states[{" a1", " b2"}] = {{" c3", 1.0}};
    auto backend = std::make_shared<MockBackend>();
    backend->set_completion_table(table);
    ModelGateway gateway(backend);

    ResponseTree tree =
        build_tree(gateway, tree_config(TreeMode::per_token, 0.5, 2), kPrompt);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[2].token == " b2");
    CHECK(tree.nodes[2].leaf);
    CHECK(tree.nodes[2].cut);
    CHECK(tree.leaf_count == 1);
    CHECK_FALSE(tree.budget_exhausted);
  }

  SUBCASE("a branch queued at the depth limit is cut without a call") {
    ScriptedTable table;
    table.states[{}] = {{" a1", 0.6}, {" b1", 0.4}};
    table.states[{" a1"}] = {{" c2", 1.0}};
    table.states[{" b1"}] = {{" e2", 1.0}};
    auto backend = std::make_shared<MockBackend>();
    backend->set_completion_table(table);
    ModelGateway gateway(backend);

    ResponseTree tree =
        build_tree(gateway, tree_config(TreeMode::per_token, 0.3, 1), kPrompt);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[1].token == " a1");
    CHECK(tree.nodes[1].cut);
    CHECK(tree.nodes[2].token == " b1");
    CHECK(tree.nodes[2].cut);
    CHECK(tree.leaf_count == 2);
    CHECK(backend->call_count() == 1);
  }
}

TEST_CASE("a prompt that generates nothing leaves the root as the leaf") {
  ScriptedTable table;
  table.states[{" x1"}] = {{" y2", 1.0}};
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(table);
  ModelGateway gateway(backend);

  ResponseTree tree =
      build_tree(gateway, tree_config(TreeMode::per_token, 0.5), kPrompt);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].leaf);
  CHECK_FALSE(tree.nodes[0].cut);
  CHECK(tree.leaf_count == 1);
  CHECK(tree.max_branch_logprob == 0.0);
  CHECK(tree.leaf_token_paths(true) ==
        std::vector<std::vector<std::string>>{{}});

  TreeRecord record = make_tree_record(tree, "empty");
  CHECK(record.max_branch_logprob == 0.0);
  CHECK(record.node_count == 1);
  CHECK(record.leaf_count == 1);
}

TEST_CASE("alpha comparisons are inclusive at the boundary") {
  ScriptedTable table;
  table.states[{}] = {{" a1", 0.5}, {" b1", 0.5}};
  table.states[{" b1"}] = {{" c2", 1.0}};
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(table);
  ModelGateway gateway(backend);

  double boundary = std::exp(std::log(0.5));
  ResponseTree at = build_tree(
      gateway, tree_config(TreeMode::per_token, boundary), kPrompt);
  CHECK(tree_leaf_set(at) == std::set<TokenPath>{TokenPath{" a1"},
                                                 TokenPath{" b1", " c2"}});

  double above = std::nextafter(boundary, 1.0);
  ResponseTree over =
      build_tree(gateway, tree_config(TreeMode::per_token, above), kPrompt);
  CHECK(tree_leaf_set(over) == std::set<TokenPath>{TokenPath{" a1"}});
}

TEST_CASE("histogram closed forms") {
  std::vector<HistogramBin> bins = histogram({1.0, 2.0, 3.0, 4.0}, 2);
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].lo == doctest::Approx(1.0));
  CHECK(bins[0].hi == doctest::Approx(2.5));
  CHECK(bins[0].count == 2);
  CHECK(bins[1].lo == doctest::Approx(2.5));
  CHECK(bins[1].hi == 4.0);
  CHECK(bins[1].count == 2);

  SUBCASE("the maximum lands in the last bin") {
    std::vector<HistogramBin> three = histogram({0.0, 1.0}, 4);
    CHECK(three.back().count == 1);
    CHECK(three.front().count == 1);
  }
  SUBCASE("identical values share bin zero") {
    std::vector<HistogramBin> flat = histogram({3.0, 3.0, 3.0}, 4);
    CHECK(flat[0].count == 3);
    CHECK(flat[1].count == 0);
    CHECK(flat[0].lo == 3.0);
    CHECK(flat[0].hi == 3.0);
  }
  SUBCASE("counts always sum to the sample size") {
    Rng rng(99);
    std::vector<double> values;
    for (int i = 0; i < 1000; ++i) values.push_back(rng.uniform_real() * 10);
    for (int n_bins : {1, 3, 7, 16}) {
      std::vector<HistogramBin> out = histogram(values, n_bins);
      std::int64_t total = 0;
      for (const auto& bin : out) total += bin.count;
      CHECK(total == 1000);
    }
  }
  SUBCASE("invalid inputs throw") {
    CHECK_THROWS_WITH_AS(histogram({}, 3), doctest::Contains("no values"),
                         Error);
    CHECK_THROWS_WITH_AS(histogram({1.0}, 0), doctest::Contains("bins"),
                         Error);
    CHECK_THROWS_WITH_AS(
        histogram({std::numeric_limits<double>::quiet_NaN()}, 2),
        doctest::Contains("non-finite"), Error);
  }
}

TEST_CASE("correlation closed forms") {
  CHECK(correlate({1, 2, 3, 4}, {2, 1, 4, 3}) ==
        doctest::Approx(0.6).epsilon(1e-12));
  CHECK(correlate({1, 2, 3}, {6, 4, 2}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(correlate({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("degenerate inputs raise defined errors") {
    CHECK_THROWS_WITH_AS(correlate({1, 2, 3}, {5, 5, 5}),
                         doctest::Contains("zero variance"), Error);
    CHECK_THROWS_WITH_AS(correlate({1, 2}, {1, 2, 3}),
                         doctest::Contains("length mismatch"), Error);
    CHECK_THROWS_WITH_AS(correlate({1}, {2}),
                         doctest::Contains("at least two"), Error);
    CHECK_THROWS_WITH_AS(
        correlate({1.0, std::numeric_limits<double>::infinity()}, {1, 2}),
        doctest::Contains("non-finite"), Error);
  }
}

TEST_CASE("tree_stats aggregates records") {
  auto record = [](const std::string& id, int leaf_count,
                   std::optional<double> best, bool exhausted) {
    TreeRecord out;
    out.source_id = id;
    out.alpha = 0.3;
    out.mode = TreeMode::per_token;
    out.node_count = leaf_count * 2;
    out.leaf_count = leaf_count;
    out.max_branch_logprob = best;
    out.budget_exhausted = exhausted;
    return out;
  };
  std::vector<TreeRecord> records = {
      record("a", 2, std::log(0.5), false),
      record("b", 4, std::log(0.25), false),
      record("c", 6, std::nullopt, false),
      record("d", 9, std::log(0.125), true),
  };
  std::map<std::string, double> labels = {
      {"a", 1.0}, {"b", 2.0}, {"c", 3.0}, {"d", 99.0}};

  SUBCASE("budget-exhausted trees are excluded by default") {
    TreeStats stats = tree_stats(records, labels, 2, false);
    CHECK(stats.total == 4);
    CHECK(stats.included == 3);
    CHECK(stats.excluded_cut == 1);
    CHECK(stats.mean_leaf_count == doctest::Approx(4.0));
    CHECK(stats.mean_max_branch_prob == doctest::Approx(0.375));
    REQUIRE(stats.leaf_count_histogram.size() == 2);
    CHECK(stats.leaf_count_histogram[0].count == 1);
    CHECK(stats.leaf_count_histogram[1].count == 2);
    REQUIRE(stats.label_correlation.has_value());
    CHECK(*stats.label_correlation == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats.flags.empty());
  }

  SUBCASE("include_cut keeps them") {
    TreeStats stats = tree_stats(records, labels, 2, true);
    CHECK(stats.included == 4);
    CHECK(stats.excluded_cut == 0);
    CHECK(stats.label_correlation.has_value());
  }

  SUBCASE("records without labels drop out of the correlation") {
    std::map<std::string, double> partial = {{"a", 5.0}, {"b", 1.0}};
    TreeStats stats = tree_stats(records, partial, 2, false);
    REQUIRE(stats.label_correlation.has_value());
    // Two points, descending: correlation is exactly -1.
    CHECK(*stats.label_correlation == doctest::Approx(-1.0).epsilon(1e-12));
  }

  SUBCASE("degenerate correlations raise a flag instead of a value") {
    std::vector<TreeRecord> flat = {record("a", 3, std::nullopt, false),
                                    record("b", 3, std::nullopt, false)};
    TreeStats stats = tree_stats(flat, labels, 2, false);
    CHECK_FALSE(stats.label_correlation.has_value());
    CHECK(stats.flags == std::vector<std::string>{"undefined_correlation"});
    CHECK(stats.mean_max_branch_prob == 0.0);
  }

  SUBCASE("a single labeled record cannot correlate") {
    std::vector<TreeRecord> one = {record("a", 3, std::nullopt, false),
                                   record("zz", 5, std::nullopt, false)};
    TreeStats stats = tree_stats(one, labels, 2, false);
    CHECK_FALSE(stats.label_correlation.has_value());
    CHECK(stats.flags == std::vector<std::string>{"undefined_correlation"});
  }

  SUBCASE("excluding everything flags no_trees") {
    std::vector<TreeRecord> cut = {record("a", 3, std::nullopt, true)};
    TreeStats stats = tree_stats(cut, labels, 2, false);
    CHECK(stats.included == 0);
    CHECK(stats.excluded_cut == 1);
    CHECK(stats.flags == std::vector<std::string>{"no_trees",
                                                  "undefined_correlation"});
  }
}

TEST_CASE("make_tree_record copies tree summary fields") {
  ScriptedTable table;
  table.states[{}] = {{" a1", 0.75}, {" b1", 0.25}};
  table.states[{" b1"}] = {{" c2", 1.0}};
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(table);
  ModelGateway gateway(backend);

  ResponseTree tree =
      build_tree(gateway, tree_config(TreeMode::per_token, 0.2), kPrompt);
  TreeRecord record = make_tree_record(tree, "sample-7");
  CHECK(record.source_id == "sample-7");
  CHECK(record.alpha == 0.2);
  CHECK(record.mode == TreeMode::per_token);
  CHECK(record.node_count == static_cast<int>(tree.nodes.size()));
  CHECK(record.leaf_count == tree.leaf_count);
  REQUIRE(record.max_branch_logprob.has_value());
  CHECK(*record.max_branch_logprob ==
        doctest::Approx(std::log(0.75)).epsilon(1e-12));
  CHECK_FALSE(record.budget_exhausted);
}

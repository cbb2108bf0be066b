#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"

namespace goalgauge {

enum class TreeMode {
  per_token,  // an alternative branches when its own probability passes alpha
  path_mass,  // a branch survives while its whole path keeps mass >= alpha
};

const std::string& tree_mode_name(TreeMode mode);
TreeMode tree_mode_from_name(const std::string& name);

// One token instance. The root carries no token. Path mass is the exp of
// token logprobs summed root-to-node, in that order; qualification tests use
// exactly that quantity.
struct TreeNode {
  int id = 0;
  int parent = -1;
  std::string token;
  double token_logprob = 0.0;
  double path_logprob = 0.0;
  std::vector<int> children;
  bool leaf = false;
  bool cut = false;  // ended by the node budget or depth limit, not by EOS
};

struct ResponseTree {
  std::string root_prompt;
  double alpha = 0.0;
  TreeMode mode = TreeMode::per_token;
  std::vector<TreeNode> nodes;  // nodes[0] is the root, parents precede children
  int leaf_count = 0;
  // Highest path logprob over non-cut leaves; -infinity when there are none.
  double max_branch_logprob = 0.0;
  bool budget_exhausted = false;

  std::vector<int> leaves() const;
  std::vector<std::vector<std::string>> leaf_token_paths(
      bool include_cut = true) const;
};

struct TreeConfig {
  double alpha = 0.1;  // in (0, 1]
  TreeMode mode = TreeMode::per_token;
  int node_budget = 256;  // counts every node, the root included
  ModelEndpoint endpoint;  // params.max_output_tokens bounds tree depth
};

// Breadth-first tree expansion over greedy rollouts. Each rollout extends a
// node greedily; qualifying alternatives become branch nodes and queue their
// own rollouts. Siblings are ordered by descending logprob (the chosen token
// first), ties by byte order. When the node budget is hit, pending branches
// become cut leaves. In path_mass mode, chains whose continuations all fall
// below alpha before reaching EOS are pruned afterwards; the root always
// stays and counts as a leaf only when generation ends immediately.
ResponseTree build_tree(ModelGateway& gateway, const TreeConfig& config,
                        const std::string& prompt);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;
};

// Equal-width bins over [min, max]; the maximum lands in the last bin. All
// values share bin 0 when min == max.
std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    int bins);

// Pearson correlation, two-pass. Throws on fewer than two points, length
// mismatch, non-finite values or zero variance.
double correlate(const std::vector<double>& xs, const std::vector<double>& ys);

struct TreeRecord {
  std::string source_id;
  double alpha = 0.0;
  TreeMode mode = TreeMode::per_token;
  int node_count = 0;
  int leaf_count = 0;
  std::optional<double> max_branch_logprob;  // empty when no non-cut leaf
  bool budget_exhausted = false;
};

TreeRecord make_tree_record(const ResponseTree& tree,
                            const std::string& source_id);

struct TreeStats {
  int total = 0;
  int included = 0;
  int excluded_cut = 0;
  double mean_leaf_count = 0.0;
  double mean_max_branch_prob = 0.0;  // over included trees that have one
  std::vector<HistogramBin> leaf_count_histogram;
  std::optional<double> label_correlation;  // leaf count vs numeric label
  std::vector<std::string> flags;
};

// Aggregates records, excluding budget-exhausted trees unless include_cut.
// labels maps source ids to a numeric target for the correlation; pairs are
// formed from included records with a label. Degenerate correlations raise
// the undefined_correlation flag instead of a value.
TreeStats tree_stats(const std::vector<TreeRecord>& records,
                     const std::map<std::string, double>& labels, int bins,
                     bool include_cut);

}  // namespace goalgauge

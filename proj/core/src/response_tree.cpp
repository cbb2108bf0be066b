#include "goalgauge/response_tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "goalgauge/errors.hpp"

namespace goalgauge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct RolloutJob {
  int node = 0;
  std::string prefix;
  int depth = 0;
};

bool qualifies(TreeMode mode, double path_logprob, double token_logprob,
               double alpha) {
  double mass = mode == TreeMode::path_mass
                    ? std::exp(path_logprob + token_logprob)
                    : std::exp(token_logprob);
  return mass >= alpha;
}

// Keeps leaves and their ancestors. Only path_mass mode can produce chains
// that end below alpha without reaching EOS; those chains disappear here.
void prune_dead_branches(ResponseTree& tree) {
  std::vector<char> keep(tree.nodes.size(), 0);
  for (std::size_t i = tree.nodes.size(); i-- > 0;) {
    const TreeNode& node = tree.nodes[i];
    bool kept = node.leaf;
    for (int child : node.children) {
      if (keep[static_cast<std::size_t>(child)]) kept = true;
    }
    keep[i] = kept ? 1 : 0;
  }
  keep[0] = 1;  // the root survives even an empty tree

  std::vector<int> remap(tree.nodes.size(), -1);
  std::vector<TreeNode> kept_nodes;
  kept_nodes.reserve(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<int>(kept_nodes.size());
    kept_nodes.push_back(tree.nodes[i]);
  }
  for (TreeNode& node : kept_nodes) {
    node.id = remap[static_cast<std::size_t>(node.id)];
    if (node.parent >= 0) {
      node.parent = remap[static_cast<std::size_t>(node.parent)];
    }
    std::vector<int> children;
    children.reserve(node.children.size());
    for (int child : node.children) {
      if (remap[static_cast<std::size_t>(child)] >= 0) {
        children.push_back(remap[static_cast<std::size_t>(child)]);
      }
    }
    node.children = std::move(children);
  }
  tree.nodes = std::move(kept_nodes);
}

void finalize(ResponseTree& tree) {
  tree.leaf_count = 0;
  tree.max_branch_logprob = kNegInf;
  for (const TreeNode& node : tree.nodes) {
    if (!node.leaf) continue;
    ++tree.leaf_count;
    if (!node.cut && node.path_logprob > tree.max_branch_logprob) {
      tree.max_branch_logprob = node.path_logprob;
    }
  }
}

}  // namespace

const std::string& tree_mode_name(TreeMode mode) {
  static const std::string kNames[] = {"per_token", "path_mass"};
  switch (mode) {
    case TreeMode::per_token:
      return kNames[0];
    case TreeMode::path_mass:
      return kNames[1];
  }
  throw Error("tree_mode_name: invalid mode");
}

TreeMode tree_mode_from_name(const std::string& name) {
  if (name == "per_token") return TreeMode::per_token;
  if (name == "path_mass") return TreeMode::path_mass;
  throw Error("unknown tree mode \"" + name + "\"");
}

std::vector<int> ResponseTree::leaves() const {
  std::vector<int> out;
  for (const TreeNode& node : nodes) {
    if (node.leaf) out.push_back(node.id);
  }
  return out;
}

std::vector<std::vector<std::string>> ResponseTree::leaf_token_paths(
    bool include_cut) const {
  std::vector<std::vector<std::string>> paths;
  for (const TreeNode& node : nodes) {
    if (!node.leaf || (node.cut && !include_cut)) continue;
    std::vector<std::string> path;
    for (int at = node.id; at > 0; at = nodes[static_cast<std::size_t>(at)].parent) {
      path.push_back(nodes[static_cast<std::size_t>(at)].token);
    }
    std::reverse(path.begin(), path.end());
    paths.push_back(std::move(path));
  }
  return paths;
}

ResponseTree build_tree(ModelGateway& gateway, const TreeConfig& config,
                        const std::string& prompt) {
  if (!(config.alpha > 0.0) || config.alpha > 1.0) {
    throw Error("build_tree: alpha must be in (0, 1]");
  }
  if (config.node_budget < 1) {
    throw Error("build_tree: node_budget must be at least 1");
  }
  int max_depth = config.endpoint.params.max_output_tokens;
  if (max_depth < 1) {
    throw Error("build_tree: endpoint max_output_tokens must be at least 1");
  }

  ResponseTree tree;
  tree.root_prompt = prompt;
  tree.alpha = config.alpha;
  tree.mode = config.mode;
  tree.nodes.push_back(TreeNode{});

  std::size_t budget = static_cast<std::size_t>(config.node_budget);
  std::deque<RolloutJob> jobs;
  jobs.push_back(RolloutJob{0, prompt, 0});

  while (!jobs.empty()) {
    RolloutJob job = std::move(jobs.front());
    jobs.pop_front();
    TreeNode* current = &tree.nodes[static_cast<std::size_t>(job.node)];

    // Once the budget is gone no pending branch can grow; they all become
    // cut leaves without spending a model call.
    if (tree.budget_exhausted) {
      current->leaf = true;
      current->cut = true;
      continue;
    }
    if (job.depth >= max_depth) {
      current->leaf = true;
      current->cut = true;
      continue;
    }

    GenerationParams params = config.endpoint.params;
    params.max_output_tokens = max_depth - job.depth;
    CompletionResult rollout =
        gateway.complete_with_logprobs(config.endpoint, job.prefix, params);

    int at = job.node;
    std::string prefix = job.prefix;
    int depth = job.depth;
    bool dead = false;

    for (const TokenStep& step : rollout.steps) {
      double base_path = tree.nodes[static_cast<std::size_t>(at)].path_logprob;
      if (config.mode == TreeMode::path_mass &&
          !qualifies(config.mode, base_path, step.logprob, config.alpha)) {
        dead = true;  // no alternative can pass either: p_alt <= p_chosen
        break;
      }
      if (tree.nodes.size() >= budget) {
        tree.budget_exhausted = true;
        TreeNode& stopped = tree.nodes[static_cast<std::size_t>(at)];
        stopped.leaf = true;
        stopped.cut = true;
        dead = true;
        break;
      }

      TreeNode child;
      child.id = static_cast<int>(tree.nodes.size());
      child.parent = at;
      child.token = step.token;
      child.token_logprob = step.logprob;
      child.path_logprob = base_path + step.logprob;
      tree.nodes.push_back(child);
      tree.nodes[static_cast<std::size_t>(at)].children.push_back(child.id);

      for (std::size_t k = 1; k < step.alternatives.size(); ++k) {
        const auto& [alt_token, alt_logprob] = step.alternatives[k];
        if (!qualifies(config.mode, base_path, alt_logprob, config.alpha)) {
          break;  // alternatives are sorted by descending logprob
        }
        if (tree.nodes.size() >= budget) {
          tree.budget_exhausted = true;
          break;
        }
        TreeNode branch;
        branch.id = static_cast<int>(tree.nodes.size());
        branch.parent = at;
        branch.token = alt_token;
        branch.token_logprob = alt_logprob;
        branch.path_logprob = base_path + alt_logprob;
        tree.nodes.push_back(branch);
        tree.nodes[static_cast<std::size_t>(at)].children.push_back(branch.id);
        jobs.push_back(RolloutJob{branch.id, prefix + alt_token, depth + 1});
      }

      prefix += step.token;
      at = child.id;
      ++depth;
    }

    if (dead) continue;

    TreeNode& tail = tree.nodes[static_cast<std::size_t>(at)];
    tail.leaf = true;
    if (rollout.stop_reason == StopReason::length) {
      tail.cut = true;
    }
  }

  if (config.mode == TreeMode::path_mass) prune_dead_branches(tree);
  finalize(tree);
  return tree;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    int bins) {
  if (bins < 1) throw Error("histogram: bins must be at least 1");
  if (values.empty()) throw Error("histogram: no values");
  for (double value : values) {
    if (!std::isfinite(value)) throw Error("histogram: non-finite value");
  }
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  double width = (hi - lo) / static_cast<double>(bins);

  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].lo = lo + width * b;
    out[static_cast<std::size_t>(b)].hi = lo + width * (b + 1);
  }
  out.back().hi = hi;
  for (double value : values) {
    std::size_t bin = 0;
    if (width > 0.0) {
      bin = static_cast<std::size_t>((value - lo) / width);
      if (bin >= static_cast<std::size_t>(bins)) {
        bin = static_cast<std::size_t>(bins) - 1;  // value == max
      }
    }
    ++out[bin].count;
  }
  return out;
}

double correlate(const std::vector<double>& xs,
                 const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("correlate: length mismatch");
  if (xs.size() < 2) throw Error("correlate: need at least two points");
  double n = static_cast<double>(xs.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
      throw Error("correlate: non-finite value");
    }
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= n;
  mean_y /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mean_x;
    double dy = ys[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("correlate: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

TreeRecord make_tree_record(const ResponseTree& tree,
                            const std::string& source_id) {
  TreeRecord record;
  record.source_id = source_id;
  record.alpha = tree.alpha;
  record.mode = tree.mode;
  record.node_count = static_cast<int>(tree.nodes.size());
  record.leaf_count = tree.leaf_count;
  if (std::isfinite(tree.max_branch_logprob)) {
    record.max_branch_logprob = tree.max_branch_logprob;
  }
  record.budget_exhausted = tree.budget_exhausted;
  return record;
}

TreeStats tree_stats(const std::vector<TreeRecord>& records,
                     const std::map<std::string, double>& labels, int bins,
                     bool include_cut) {
  TreeStats stats;
  stats.total = static_cast<int>(records.size());

  std::vector<double> leaf_counts;
  std::vector<double> xs;
  std::vector<double> ys;
  double branch_prob_sum = 0.0;
  int branch_prob_count = 0;
  for (const TreeRecord& record : records) {
    if (record.budget_exhausted && !include_cut) {
      ++stats.excluded_cut;
      continue;
    }
    ++stats.included;
    leaf_counts.push_back(static_cast<double>(record.leaf_count));
    if (record.max_branch_logprob.has_value()) {
      branch_prob_sum += std::exp(*record.max_branch_logprob);
      ++branch_prob_count;
    }
    auto label = labels.find(record.source_id);
    if (label != labels.end()) {
      xs.push_back(static_cast<double>(record.leaf_count));
      ys.push_back(label->second);
    }
  }

  if (stats.included == 0) {
    stats.flags.push_back("no_trees");
    stats.flags.push_back("undefined_correlation");
    return stats;
  }
  stats.mean_leaf_count = 0.0;
  for (double count : leaf_counts) stats.mean_leaf_count += count;
  stats.mean_leaf_count /= static_cast<double>(leaf_counts.size());
  if (branch_prob_count > 0) {
    stats.mean_max_branch_prob =
        branch_prob_sum / static_cast<double>(branch_prob_count);
  }
  stats.leaf_count_histogram = histogram(leaf_counts, bins);
  try {
    stats.label_correlation = correlate(xs, ys);
  } catch (const Error&) {
    stats.flags.push_back("undefined_correlation");
  }
  return stats;
}

}  // namespace goalgauge

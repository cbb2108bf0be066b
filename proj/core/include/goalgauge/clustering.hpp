#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "goalgauge/gateway.hpp"
#include "goalgauge/interaction.hpp"
#include "goalgauge/prompts.hpp"
#include "goalgauge/rng.hpp"

namespace goalgauge {

struct GoalSummary {
  std::string source_id;
  std::string text;
  EmbeddingVector vector;
};

struct Cluster {
  int id = 0;
  std::set<std::string> member_ids;
  std::string label;
  EmbeddingVector label_vector;
  std::vector<double> centroid;
};

struct ClusterSet {
  std::vector<Cluster> clusters;
  std::map<std::string, int> assignments;  // source id -> cluster id

  int k() const { return static_cast<int>(clusters.size()); }
  const Cluster& by_id(int id) const;
};

// Symmetric similarity matrix over cluster labels. The diagonal starts
// masked; rejected pairs are masked symmetrically; deleting a cluster masks
// its row and column.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t n);

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, double value);
  bool masked(std::size_t i, std::size_t j) const;
  void mask(std::size_t i, std::size_t j);
  void mask_row_col(std::size_t i);
  void unmask(std::size_t i, std::size_t j);

  // Largest unmasked entry; ties resolve to the lowest (i, j). Scans the
  // upper triangle only, so (i, j) always has i < j.
  std::optional<std::pair<std::size_t, std::size_t>> argmax() const;

 private:
  std::size_t index(std::size_t i, std::size_t j) const { return i * n_ + j; }

  std::size_t n_;
  std::vector<double> values_;
  std::vector<char> masked_;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Cosine similarities between label vectors; throws on a zero-norm label
// naming the cluster index.
SimilarityMatrix similarity_matrix(
    const std::vector<EmbeddingVector>& label_vectors);

struct ClusteringConfig {
  int k1 = 20;
  std::uint64_t seed = 0;
  std::string context;  // optional paragraph prepended via {context}
  PromptSet prompts = PromptSet::defaults();
  int exemplars_per_side = 10;
  int parallelism = 4;
  ModelEndpoint chat_endpoint;
  ModelEndpoint embedding_endpoint;
  TurnTemplate turn_template;
};

struct MergeStats {
  enum class Termination { failure_budget, exhausted };

  int accepts = 0;
  int rejects = 0;
  int queries = 0;
  int k_initial = 0;
  int k_final = 0;
  int failures_at_end = 0;
  int live_at_end = 0;
  int empty_dropped = 0;
  Termination termination = Termination::exhausted;
  // Rejections observed between consecutive accepts, including the stretch
  // before the first accept and after the last.
  std::vector<int> rejects_between_merges;
};

struct ClusteringResult {
  ClusterSet set;
  std::vector<GoalSummary> summaries;
  MergeStats merge;
  int k_initial = 0;  // live clusters entering the merge loop
};

GoalSummary summarize_goal(const Interaction& interaction,
                           ModelGateway& gateway,
                           const ClusteringConfig& config);

std::string describe_cluster(const Cluster& cluster,
                             const std::vector<GoalSummary>& all_summaries,
                             ModelGateway& gateway,
                             const ClusteringConfig& config, Rng& rng);

// One merge pass per the two-phase scheme: repeatedly judge the most similar
// unmasked pair; a YES unions members, relabels via describe_cluster and
// resets the failure counter; a NO masks the pair. Stops when consecutive
// failures reach the live cluster count or no unmasked pair remains.
ClusterSet merge_pass(ClusterSet set, SimilarityMatrix matrix,
                      const std::vector<GoalSummary>& all_summaries,
                      ModelGateway& gateway, const ClusteringConfig& config,
                      Rng& rng, MergeStats* stats = nullptr);

ClusteringResult run_clustering(const std::vector<Interaction>& dataset,
                                ModelGateway& gateway,
                                const ClusteringConfig& config);

// Nearest centroid by Euclidean distance; ties go to the lowest cluster id.
// Returns (cluster id, distance).
std::pair<int, double> assign_unseen(const GoalSummary& summary,
                                     const ClusterSet& set);

struct BaselineResult {
  std::map<std::string, std::vector<std::string>> labels;  // id -> labels
  std::vector<std::string> categories;  // distinct replies, first-seen order
};

// Sequential LLM-only labeling baseline: the first sample names its own
// category; later samples choose from (or extend) the running category list.
BaselineResult baseline_llm_labels(const std::vector<Interaction>& dataset,
                                   ModelGateway& gateway,
                                   const ClusteringConfig& config);

}  // namespace goalgauge

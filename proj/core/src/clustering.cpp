#include "goalgauge/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <unordered_map>

#include "goalgauge/errors.hpp"
#include "goalgauge/io.hpp"
#include "goalgauge/kmeans.hpp"
#include "goalgauge/parallel.hpp"

namespace goalgauge {

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::string chat_reply(ModelGateway& gateway, const ModelEndpoint& endpoint,
                       const std::string& prompt) {
  return gateway.chat(endpoint, {{"user", prompt}});
}

std::string context_block(const std::string& context) {
  if (context.empty()) return "";
  if (context.back() == '\n') return context;
  return context + "\n";
}

using SummaryIndex = std::unordered_map<std::string, const GoalSummary*>;

SummaryIndex index_summaries(const std::vector<GoalSummary>& summaries) {
  SummaryIndex index;
  for (const auto& summary : summaries) index[summary.source_id] = &summary;
  return index;
}

// Samples up to `count` of `texts` (draw order) and renders them as a
// "- ..." bullet list, one blank line between bullets.
std::string sample_bullets(const std::vector<std::string>& texts,
                           std::size_t count, Rng& rng) {
  std::size_t k = std::min(count, texts.size());
  std::vector<std::size_t> picks = rng.sample_indices(texts.size(), k);
  std::vector<std::string> bullets;
  bullets.reserve(picks.size());
  for (std::size_t index : picks) bullets.push_back("- " + texts[index]);
  return join(bullets, "\n\n");
}

std::vector<std::string> member_texts(const Cluster& cluster,
                                      const SummaryIndex& index) {
  std::vector<std::string> texts;
  texts.reserve(cluster.member_ids.size());
  for (const std::string& id : cluster.member_ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error("describe_cluster: no summary for member \"" + id + "\"");
    }
    texts.push_back(it->second->text);
  }
  return texts;
}

std::vector<std::string> complement_texts(
    const std::vector<GoalSummary>& all_summaries,
    const std::set<std::string>& excluded) {
  std::vector<std::string> texts;
  for (const auto& summary : all_summaries) {
    if (excluded.count(summary.source_id) == 0) texts.push_back(summary.text);
  }
  return texts;
}

std::vector<double> mean_member_vector(const Cluster& cluster,
                                       const SummaryIndex& index) {
  std::vector<double> mean;
  std::size_t count = 0;
  for (const std::string& id : cluster.member_ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error("cluster centroid: no summary for member \"" + id + "\"");
    }
    const std::vector<double>& values = it->second->vector.values;
    if (mean.empty()) mean.assign(values.size(), 0.0);
    if (values.size() != mean.size()) {
      throw Error("cluster centroid: mixed embedding dimensions");
    }
    for (std::size_t d = 0; d < values.size(); ++d) mean[d] += values[d];
    ++count;
  }
  if (count == 0) throw Error("cluster centroid: empty cluster");
  for (double& value : mean) value /= static_cast<double>(count);
  return mean;
}

std::vector<std::string> split_label_reply(const std::string& reply) {
  std::vector<std::string> labels;
  std::string current;
  auto flush = [&] {
    std::string label = trim(current);
    if (!label.empty()) labels.push_back(label);
    current.clear();
  };
  for (char c : reply) {
    if (c == ',' || c == '\n') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return labels;
}

}  // namespace

const Cluster& ClusterSet::by_id(int id) const {
  for (const auto& cluster : clusters) {
    if (cluster.id == id) return cluster;
  }
  throw Error("ClusterSet: no cluster with id " + std::to_string(id));
}

SimilarityMatrix::SimilarityMatrix(std::size_t n)
    : n_(n), values_(n * n, 0.0), masked_(n * n, 1) {}

double SimilarityMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw Error("SimilarityMatrix: index out of range");
  return values_[index(i, j)];
}

void SimilarityMatrix::set(std::size_t i, std::size_t j, double value) {
  if (i >= n_ || j >= n_) throw Error("SimilarityMatrix: index out of range");
  if (i == j) throw Error("SimilarityMatrix: diagonal is not settable");
  values_[index(i, j)] = value;
  values_[index(j, i)] = value;
  masked_[index(i, j)] = 0;
  masked_[index(j, i)] = 0;
}

bool SimilarityMatrix::masked(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw Error("SimilarityMatrix: index out of range");
  return masked_[index(i, j)] != 0;
}

void SimilarityMatrix::mask(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw Error("SimilarityMatrix: index out of range");
  masked_[index(i, j)] = 1;
  masked_[index(j, i)] = 1;
}

void SimilarityMatrix::mask_row_col(std::size_t i) {
  if (i >= n_) throw Error("SimilarityMatrix: index out of range");
  for (std::size_t j = 0; j < n_; ++j) {
    masked_[index(i, j)] = 1;
    masked_[index(j, i)] = 1;
  }
}

void SimilarityMatrix::unmask(std::size_t i, std::size_t j) {
  if (i >= n_ || j >= n_) throw Error("SimilarityMatrix: index out of range");
  if (i == j) throw Error("SimilarityMatrix: diagonal stays masked");
  masked_[index(i, j)] = 0;
  masked_[index(j, i)] = 0;
}

std::optional<std::pair<std::size_t, std::size_t>> SimilarityMatrix::argmax()
    const {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (masked_[index(i, j)]) continue;
      if (!best || values_[index(i, j)] > best_value) {
        best = std::make_pair(i, j);
        best_value = values_[index(i, j)];
      }
    }
  }
  return best;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t d = 0; d < a.values.size(); ++d) {
    dot += a.values[d] * b.values[d];
    na += a.values[d] * a.values[d];
    nb += b.values[d] * b.values[d];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error("cosine_similarity: zero-norm vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

SimilarityMatrix similarity_matrix(
    const std::vector<EmbeddingVector>& label_vectors) {
  for (std::size_t i = 0; i < label_vectors.size(); ++i) {
    if (label_vectors[i].norm() == 0.0) {
      throw Error("similarity_matrix: zero-norm label vector for cluster " +
                  std::to_string(i));
    }
  }
  SimilarityMatrix matrix(label_vectors.size());
  for (std::size_t i = 0; i < label_vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < label_vectors.size(); ++j) {
      matrix.set(i, j, cosine_similarity(label_vectors[i], label_vectors[j]));
    }
  }
  return matrix;
}

GoalSummary summarize_goal(const Interaction& interaction,
                           ModelGateway& gateway,
                           const ClusteringConfig& config) {
  std::string prompt = PromptSet::render(
      config.prompts.summarize,
      {{"context", context_block(config.context)},
       {"log", concat_turns(interaction, -1, config.turn_template)}});
  GoalSummary summary;
  summary.source_id = interaction.id;
  summary.text = trim(chat_reply(gateway, config.chat_endpoint, prompt));
  summary.vector =
      gateway.embed_batch(config.embedding_endpoint, {summary.text})[0];
  return summary;
}

std::string describe_cluster(const Cluster& cluster,
                             const std::vector<GoalSummary>& all_summaries,
                             ModelGateway& gateway,
                             const ClusteringConfig& config, Rng& rng) {
  SummaryIndex index = index_summaries(all_summaries);
  std::size_t per_side = static_cast<std::size_t>(
      std::max(0, config.exemplars_per_side));
  std::string group = sample_bullets(member_texts(cluster, index), per_side,
                                     rng);
  std::string rest = sample_bullets(
      complement_texts(all_summaries, cluster.member_ids), per_side, rng);
  std::string prompt = PromptSet::render(
      config.prompts.describe, {{"group", group}, {"not_in_group", rest}});
  return trim(chat_reply(gateway, config.chat_endpoint, prompt));
}

ClusterSet merge_pass(ClusterSet set, SimilarityMatrix matrix,
                      const std::vector<GoalSummary>& all_summaries,
                      ModelGateway& gateway, const ClusteringConfig& config,
                      Rng& rng, MergeStats* stats) {
  std::size_t n = set.clusters.size();
  if (matrix.size() != n) {
    throw Error("merge_pass: matrix size does not match cluster count");
  }
  SummaryIndex index = index_summaries(all_summaries);
  std::size_t per_side = static_cast<std::size_t>(
      std::max(0, config.exemplars_per_side));

  MergeStats tally;
  tally.k_initial = static_cast<int>(n);
  std::vector<char> alive(n, 1);
  int live = static_cast<int>(n);
  int failures = 0;
  int rejects_since = 0;

  while (true) {
    if (failures >= live) {
      tally.termination = MergeStats::Termination::failure_budget;
      break;
    }
    auto pair = matrix.argmax();
    if (!pair) {
      tally.termination = MergeStats::Termination::exhausted;
      break;
    }
    auto [i, j] = *pair;
    Cluster& left = set.clusters[i];
    Cluster& right = set.clusters[j];

    std::set<std::string> either = left.member_ids;
    either.insert(right.member_ids.begin(), right.member_ids.end());
    std::string prompt = PromptSet::render(
        config.prompts.merge,
        {{"group1", sample_bullets(member_texts(left, index), per_side, rng)},
         {"group2", sample_bullets(member_texts(right, index), per_side, rng)},
         {"not_in_group",
          sample_bullets(complement_texts(all_summaries, either), per_side,
                         rng)}});
    std::string reply = chat_reply(gateway, config.chat_endpoint, prompt);
    ++tally.queries;

    if (is_affirmative(reply, merge_affirmative_regex())) {
      ++tally.accepts;
      tally.rejects_between_merges.push_back(rejects_since);
      rejects_since = 0;
      failures = 0;

      left.member_ids.insert(right.member_ids.begin(),
                             right.member_ids.end());
      alive[j] = 0;
      --live;
      matrix.mask_row_col(j);

      left.label = describe_cluster(left, all_summaries, gateway, config, rng);
      left.label_vector =
          gateway.embed_batch(config.embedding_endpoint, {left.label})[0];
      for (std::size_t x = 0; x < n; ++x) {
        if (x == i || !alive[x]) continue;
        matrix.set(i, x, cosine_similarity(left.label_vector,
                                           set.clusters[x].label_vector));
      }
    } else {
      ++tally.rejects;
      ++rejects_since;
      ++failures;
      matrix.mask(i, j);
    }
  }

  tally.rejects_between_merges.push_back(rejects_since);
  tally.failures_at_end = failures;
  tally.live_at_end = live;
  tally.k_final = live;

  ClusterSet out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    Cluster cluster = set.clusters[i];
    cluster.id = static_cast<int>(out.clusters.size());
    cluster.centroid = mean_member_vector(cluster, index);
    for (const std::string& id : cluster.member_ids) {
      out.assignments[id] = cluster.id;
    }
    out.clusters.push_back(std::move(cluster));
  }
  if (stats != nullptr) {
    int empty_dropped = stats->empty_dropped;
    *stats = tally;
    stats->empty_dropped = empty_dropped;
  }
  return out;
}

ClusteringResult run_clustering(const std::vector<Interaction>& dataset,
                                ModelGateway& gateway,
                                const ClusteringConfig& config) {
  if (dataset.empty()) throw Error("run_clustering: empty dataset");
  if (config.k1 < 1) throw Error("run_clustering: k1 must be at least 1");

  std::vector<std::string> texts = parallel_map(
      dataset.size(),
      [&](std::size_t i) {
        std::string prompt = PromptSet::render(
            config.prompts.summarize,
            {{"context", context_block(config.context)},
             {"log", concat_turns(dataset[i], -1, config.turn_template)}});
        return trim(chat_reply(gateway, config.chat_endpoint, prompt));
      },
      config.parallelism);
  std::vector<EmbeddingVector> vectors =
      gateway.embed_batch(config.embedding_endpoint, texts);

  ClusteringResult result;
  result.summaries.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    result.summaries.push_back(
        GoalSummary{dataset[i].id, texts[i], vectors[i]});
  }

  KmeansResult kmeans_result = kmeans(vectors, config.k1, config.seed);

  std::vector<Cluster> initial(static_cast<std::size_t>(config.k1));
  for (int c = 0; c < config.k1; ++c) {
    initial[static_cast<std::size_t>(c)].id = c;
    initial[static_cast<std::size_t>(c)].centroid =
        kmeans_result.centroids[static_cast<std::size_t>(c)];
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    initial[static_cast<std::size_t>(kmeans_result.assignments[i])]
        .member_ids.insert(dataset[i].id);
  }

  // Empty clusters are dropped up front; they never reach the judge.
  ClusterSet live_set;
  int empty_dropped = 0;
  for (auto& cluster : initial) {
    if (cluster.member_ids.empty()) {
      ++empty_dropped;
      continue;
    }
    cluster.id = static_cast<int>(live_set.clusters.size());
    live_set.clusters.push_back(std::move(cluster));
  }
  result.k_initial = live_set.k();

  Rng rng(config.seed);
  std::vector<std::string> labels;
  labels.reserve(live_set.clusters.size());
  for (auto& cluster : live_set.clusters) {
    cluster.label =
        describe_cluster(cluster, result.summaries, gateway, config, rng);
    labels.push_back(cluster.label);
  }
  std::vector<EmbeddingVector> label_vectors =
      gateway.embed_batch(config.embedding_endpoint, labels);
  for (std::size_t c = 0; c < live_set.clusters.size(); ++c) {
    live_set.clusters[c].label_vector = label_vectors[c];
  }

  SimilarityMatrix matrix = similarity_matrix(label_vectors);
  result.merge.empty_dropped = empty_dropped;
  result.set = merge_pass(std::move(live_set), std::move(matrix),
                          result.summaries, gateway, config, rng,
                          &result.merge);
  return result;
}

std::pair<int, double> assign_unseen(const GoalSummary& summary,
                                     const ClusterSet& set) {
  if (set.clusters.empty()) throw Error("assign_unseen: empty cluster set");
  int best_id = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& cluster : set.clusters) {
    if (cluster.centroid.size() != summary.vector.values.size()) {
      throw Error("assign_unseen: dimension mismatch for cluster " +
                  std::to_string(cluster.id));
    }
    double d2 = squared_distance(summary.vector.values, cluster.centroid);
    if (!found || d2 < best_d2) {
      found = true;
      best_d2 = d2;
      best_id = cluster.id;
    }
  }
  return {best_id, std::sqrt(best_d2)};
}

BaselineResult baseline_llm_labels(const std::vector<Interaction>& dataset,
                                   ModelGateway& gateway,
                                   const ClusteringConfig& config) {
  BaselineResult result;
  for (const auto& interaction : dataset) {
    std::string log = concat_turns(interaction, -1, config.turn_template);
    std::string prompt;
    if (result.categories.empty()) {
      prompt = PromptSet::render(config.prompts.baseline_first,
                                 {{"log", log}});
    } else {
      std::vector<std::string> bullets;
      bullets.reserve(result.categories.size());
      for (const auto& category : result.categories) {
        bullets.push_back(" - " + category);
      }
      prompt = PromptSet::render(
          config.prompts.baseline_next,
          {{"categories", join(bullets, "\n")}, {"log", log}});
    }
    std::string reply = trim(chat_reply(gateway, config.chat_endpoint,
                                        prompt));
    result.labels[interaction.id] = split_label_reply(reply);
    if (!reply.empty() &&
        std::find(result.categories.begin(), result.categories.end(),
                  reply) == result.categories.end()) {
      result.categories.push_back(reply);
    }
  }
  return result;
}

}  // namespace goalgauge

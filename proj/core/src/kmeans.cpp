#include "goalgauge/kmeans.hpp"

#include <limits>

#include "goalgauge/errors.hpp"
#include "goalgauge/rng.hpp"

namespace goalgauge {

namespace {

constexpr int kMaxIterations = 100;

std::vector<std::vector<double>> seed_centroids(
    const std::vector<EmbeddingVector>& vectors, int k, Rng& rng) {
  std::size_t n = vectors.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  std::size_t first = static_cast<std::size_t>(rng.uniform_u64(0, n - 1));
  centroids.push_back(vectors[first].values);
  std::vector<double> best_distance(n, std::numeric_limits<double>::max());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = squared_distance(vectors[i].values, centroids.back());
      if (d < best_distance[i]) best_distance[i] = d;
      total += best_distance[i];
    }
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = rng.uniform_real() * total;
      double cumulative = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += best_distance[i];
        if (cumulative > target) {
          chosen = i;
          break;
        }
      }
    } else {
      // All points coincide with a centroid already; any pick is as good.
      chosen = static_cast<std::size_t>(rng.uniform_u64(0, n - 1));
    }
    centroids.push_back(vectors[chosen].values);
  }
  return centroids;
}

}  // namespace

double squared_distance(const std::vector<double>& a,
                        const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

KmeansResult kmeans(const std::vector<EmbeddingVector>& vectors, int k,
                    std::uint64_t seed) {
  std::size_t n = vectors.size();
  if (n == 0) throw Error("kmeans: empty input");
  if (k < 1) throw Error("kmeans: k must be at least 1");
  if (static_cast<std::size_t>(k) > n) {
    throw Error("kmeans: k " + std::to_string(k) + " exceeds point count " +
                std::to_string(n));
  }
  std::size_t dim = vectors[0].dim();
  for (const EmbeddingVector& v : vectors) {
    if (v.dim() != dim) throw Error("kmeans: inconsistent dimensions");
  }

  Rng rng(seed);
  KmeansResult result;
  result.centroids = seed_centroids(vectors, k, rng);
  result.assignments.assign(n, -1);

  for (int iteration = 0; iteration < kMaxIterations; ++iteration) {
    // Assignment pass; inertia is measured here so the recorded history is
    // non-increasing under both the update and reseed steps.
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_distance =
          squared_distance(vectors[i].values, result.centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d = squared_distance(vectors[i].values,
                                    result.centroids[static_cast<std::size_t>(c)]);
        if (d < best_distance) {
          best_distance = d;
          best = c;
        }
      }
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
      inertia += best_distance;
    }
    result.inertia_history.push_back(inertia);
    result.iterations = iteration + 1;
    if (!changed) break;

    // Update pass.
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = static_cast<std::size_t>(result.assignments[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) {
        sums[c][d] += vectors[i].values[d];
      }
    }
    for (int c = 0; c < k; ++c) {
      std::size_t cs = static_cast<std::size_t>(c);
      if (counts[cs] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        result.centroids[cs][d] =
            sums[cs][d] / static_cast<double>(counts[cs]);
      }
    }
    // Empty clusters are reseeded to the point farthest from its own
    // centroid; repeated empties take successive farthest points.
    std::vector<char> taken(n, 0);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t farthest = 0;
      double farthest_distance = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        double d = squared_distance(
            vectors[i].values,
            result.centroids[static_cast<std::size_t>(result.assignments[i])]);
        if (d > farthest_distance) {
          farthest_distance = d;
          farthest = i;
        }
      }
      taken[farthest] = 1;
      result.centroids[static_cast<std::size_t>(c)] = vectors[farthest].values;
    }
  }
  return result;
}

}  // namespace goalgauge

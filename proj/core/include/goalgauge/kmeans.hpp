#pragma once

#include <cstdint>
#include <vector>

#include "goalgauge/gateway.hpp"

namespace goalgauge {

struct KmeansResult {
  std::vector<int> assignments;               // one entry per input vector
  std::vector<std::vector<double>> centroids;  // k rows
  std::vector<double> inertia_history;         // one entry per assignment pass
  int iterations = 0;

  double inertia() const {
    return inertia_history.empty() ? 0.0 : inertia_history.back();
  }
};

// Lloyd's algorithm with k-means++ seeding, Euclidean metric on the raw
// vectors. Runs to an assignment fixpoint or 100 iterations; ties go to the
// lowest cluster id; an empty cluster is reseeded to the point farthest from
// its own centroid. Deterministic for a given seed.
KmeansResult kmeans(const std::vector<EmbeddingVector>& vectors, int k,
                    std::uint64_t seed);

double squared_distance(const std::vector<double>& a,
                        const std::vector<double>& b);

}  // namespace goalgauge

#include <benchmark/benchmark.h>

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "goalgauge/gateway.hpp"
#include "goalgauge/interaction.hpp"
#include "goalgauge/kmeans.hpp"
#include "goalgauge/mock_backend.hpp"
#include "goalgauge/response_tree.hpp"
#include "goalgauge/rng.hpp"

using namespace goalgauge;

namespace {

std::vector<EmbeddingVector> random_points(std::size_t n, std::size_t dim) {
  Rng rng(2024);
  std::vector<EmbeddingVector> points(n);
  for (auto& point : points) {
    point.values.resize(dim);
    for (double& value : point.values) value = rng.uniform_real();
  }
  return points;
}

// Full 4-ary scripted table down to `depth`; every internal state is present
// so branch rollouts resume exactly.
ScriptedTable full_table(int depth) {
  ScriptedTable table;
  const double kWeights[] = {0.4, 0.3, 0.2, 0.1};
  const char kLetters[] = {'a', 'b', 'c', 'd'};
  std::vector<std::vector<std::string>> frontier = {{}};
  for (int level = 0; level < depth; ++level) {
    std::vector<std::vector<std::string>> next;
    for (const auto& state : frontier) {
      std::map<std::string, double> dist;
      for (int t = 0; t < 4; ++t) {
        std::string token = " ";
        token += kLetters[t];
        token += std::to_string(level + 1);
        dist[token] = kWeights[t];
        auto child = state;
        child.push_back(token);
        next.push_back(std::move(child));
      }
      table.states[state] = std::move(dist);
    }
    frontier = std::move(next);
  }
  return table;
}

Interaction long_interaction(int pairs) {
  Interaction interaction;
  interaction.id = "bench";
  for (int p = 0; p < pairs; ++p) {
    interaction.turns.push_back(
        {Role::user, "please continue working on step " + std::to_string(p)});
    interaction.turns.push_back(
        {Role::assistant,
         "finished step " + std::to_string(p) + ", moving to the next one"});
  }
  interaction.n_turns = pairs;
  return interaction;
}

void BM_FeatureHashEmbedding(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < 100; ++i) {
    text += "token" + std::to_string(i % 17) + " ";
  }
  std::size_t dim = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    std::vector<double> vector = feature_hash_embedding(text, dim, 0);
    benchmark::DoNotOptimize(vector);
  }
}
BENCHMARK(BM_FeatureHashEmbedding)->Arg(64)->Arg(512);

void BM_Kmeans(benchmark::State& state) {
  auto points = random_points(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    KmeansResult result = kmeans(points, 8, 1);
    benchmark::DoNotOptimize(result.inertia());
  }
}
BENCHMARK(BM_Kmeans)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_BuildTree(benchmark::State& state) {
  auto backend = std::make_shared<MockBackend>();
  backend->set_completion_table(full_table(static_cast<int>(state.range(0))));
  GatewayOptions options;
  options.cache_enabled = false;  // measure construction, not cache lookups
  ModelGateway gateway(backend, options);

  TreeConfig config;
  config.alpha = 0.05;
  config.mode = TreeMode::per_token;
  config.node_budget = 1000000;
  config.endpoint.kind = EndpointKind::completion;
  config.endpoint.base_url = "mock://";
  config.endpoint.model_name = "mock-completion";
  config.endpoint.params.max_output_tokens = static_cast<int>(state.range(0));
  config.endpoint.params.top_k_logprobs = 5;

  for (auto _ : state) {
    ResponseTree tree = build_tree(gateway, config, "Q:");
    benchmark::DoNotOptimize(tree.leaf_count);
  }
  state.SetLabel(std::to_string(1 << (2 * state.range(0))) + " leaves");
}
BENCHMARK(BM_BuildTree)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ConcatTurns(benchmark::State& state) {
  Interaction interaction =
      long_interaction(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    std::string text = concat_turns(interaction);
    benchmark::DoNotOptimize(text);
  }
}
BENCHMARK(BM_ConcatTurns)->Arg(8)->Arg(64);

}  // namespace

BENCHMARK_MAIN();

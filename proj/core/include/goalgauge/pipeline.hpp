#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "goalgauge/config.hpp"

namespace goalgauge {

enum class Metric { cluster, baseline, stability, completion, rtree, sft };

const std::string& metric_name(Metric metric);
Metric metric_from_name(const std::string& name);

struct ManifestArtifact {
  std::string path;  // relative to the output directory
  std::string fnv1a64;
};

struct ManifestPhase {
  std::string name;
  std::int64_t wall_ms = 0;
  std::uint64_t llm_calls = 0;  // backend calls issued by this phase
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version;
  std::uint64_t llm_calls = 0;
  std::uint64_t cache_hits = 0;
  std::vector<ManifestPhase> phases;
  std::vector<ManifestArtifact> artifacts;
  // FNV-1a over the sorted (path, hash) pairs; timings are deliberately
  // excluded so identical runs digest identically.
  std::string tree_digest;
};

// Reported by --version and recorded in every run manifest.
extern const char kToolVersion[];

// Runs the ingest step plus the requested metric phases in a fixed canonical
// order (duplicates collapse), writing artifacts under config.output_dir and
// a run_manifest.json next to them. Every artifact is written atomically; if
// a phase fails, whatever it had produced is written with a ".partial"
// suffix instead and the error propagates.
RunManifest run_pipeline(const RunConfig& config,
                         const std::vector<Metric>& metrics);

}  // namespace goalgauge

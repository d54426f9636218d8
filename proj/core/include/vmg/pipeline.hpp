#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vmg/config.hpp"

namespace vmg::pipeline {

enum class StageStatus { ran, cached, failed };
std::string_view to_string(StageStatus status);

struct StageRecord {
  std::string name;  // e.g. "train-metric[3]"
  std::string key;   // hash of the stage's config slice and input hashes
  StageStatus status = StageStatus::ran;
  double seconds = 0.0;
  std::map<std::string, std::string> inputs;   // path relative to the run directory -> sha256
  std::map<std::string, std::string> outputs;  // same
  std::string error;
};

struct Manifest {
  std::string config_json;  // fully resolved config
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& name) const;
};

std::string encode_manifest(const Manifest& manifest);
Manifest decode_manifest(const std::string& text);
Manifest load_manifest(const std::string& path);

/// $VMG_OUTPUT_ROOT, or "runs" when unset.
std::string output_root();

struct RunOptions {
  std::ostream* log = nullptr;
};

/// collect -> train-metric -> train-translator -> select-checkpoint -> build-graph
/// -> plan -> evaluate. Stages whose key and outputs match the manifest already
/// in `run_dir` are reported as cached. A cached output whose content no longer
/// matches raises HashMismatch naming the stage; any failure is recorded in the
/// manifest before it propagates.
Manifest run_pipeline(const config::PipelineConfig& config, const std::string& run_dir, const RunOptions& options = {});

/// Re-runs the manifest's config into `run_dir` (which should be fresh) and
/// lists every output whose hash differs. Empty means bit-exact reproduction.
std::vector<std::string> replay_manifest(const std::string& manifest_path, const std::string& run_dir,
                                         const RunOptions& options = {});

/// Standard artifact locations inside a run directory.
namespace paths {
inline constexpr const char* kDataset = "dataset.vmgd";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kBundle = "agents.json";
inline constexpr const char* kReport = "eval.json";
std::string seed_dir(std::uint64_t seed);
std::string metric(std::uint64_t seed);
std::string translator(std::uint64_t seed);
std::string graph(std::uint64_t seed);
std::string values(std::uint64_t seed);
}  // namespace paths

}  // namespace vmg::pipeline

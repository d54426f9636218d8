#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vmg/envs.hpp"
#include "vmg/graph.hpp"
#include "vmg/metric.hpp"
#include "vmg/planner.hpp"
#include "vmg/translator.hpp"

namespace vmg::config {

inline constexpr int kSchemaVersion = 1;

/// Per-domain graph and planning defaults.
struct Preset {
  std::string name;
  double gamma_m = 0.8;
  double discount = 0.8;
  std::size_t subgoal_index = 1;
  std::optional<std::size_t> search_horizon;
};

/// kitchen, antmaze, pen, hammer, door.
const std::vector<Preset>& presets();
const Preset& find_preset(std::string_view name);

struct EnvSection {
  std::string name = "pointmaze-umaze";  // pointmaze-umaze | pointmaze-medium | pointmaze | chain
  std::optional<std::string> layout;     // layout file; required for plain "pointmaze"
  std::optional<std::array<int, 2>> start;  // [col, row]
  std::optional<std::array<int, 2>> goal;
  friend bool operator==(const EnvSection&, const EnvSection&) = default;
};

struct CollectSection {
  std::optional<std::string> dataset;  // use this file instead of collecting
  std::string mode = "diverse";        // diverse | goal
  std::size_t episodes = 2000;
  std::optional<std::size_t> max_transitions = 20000;
  std::size_t max_episode_steps = 60;
  double action_noise = 0.5;
  double wander_prob = 0.05;
  std::size_t wander_steps = 8;
  friend bool operator==(const CollectSection&, const CollectSection&) = default;
};

struct MetricSection {
  std::size_t metric_dim = 10;
  double margin = 1.0;
  std::size_t epochs = 800;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::size_t checkpoint_every = 50;
  friend bool operator==(const MetricSection&, const MetricSection&) = default;
};

struct GraphSection {
  double gamma_m = 0.8;
  std::string reward_mode = "avg_with_internal";
  friend bool operator==(const GraphSection&, const GraphSection&) = default;
};

struct PlanSection {
  double discount = 0.8;
  std::optional<std::size_t> search_horizon;  // null = unbounded
  std::size_t subgoal_index = 1;
  bool greedy = false;
  friend bool operator==(const PlanSection&, const PlanSection&) = default;
};

struct TranslatorSection {
  std::size_t horizon = 10;
  std::size_t epochs = 800;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::size_t checkpoint_every = 50;
  friend bool operator==(const TranslatorSection&, const TranslatorSection&) = default;
};

struct EvalSection {
  std::size_t episodes = 100;
  std::size_t model_seeds = 3;
  std::uint64_t seed_base = 1000;
  std::string checkpoint = "last";  // last | eval (joint selection over the final window)
  std::size_t select_from_epoch = 500;
  std::size_t selection_episodes = 20;
  friend bool operator==(const EvalSection&, const EvalSection&) = default;
};

struct PipelineConfig {
  int schema_version = kSchemaVersion;
  std::string preset = "antmaze";
  std::uint64_t seed = 0;
  EnvSection env;
  CollectSection collect;
  MetricSection metric;
  GraphSection graph;
  PlanSection plan;
  TranslatorSection translator;
  EvalSection eval;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

  /// Model seed i of the pipeline (i < eval.model_seeds).
  std::uint64_t model_seed(std::size_t i) const { return seed + i; }
  metric::MetricConfig metric_config(std::uint64_t model_seed) const;
  translator::TranslatorConfig translator_config(std::uint64_t model_seed) const;
  plan::PlanConfig plan_config() const;
  graph::GraphRewardMode reward_mode() const { return graph::parse_reward_mode(graph.reward_mode); }
};

/// Empty text or "{}" yields the full default set. Unknown keys and
/// out-of-range values raise ConfigError naming the key.
PipelineConfig parse_config_text(std::string_view text);
PipelineConfig parse_config(const std::string& path);
/// Every field, resolved; parse_config_text(to_json(c)) == c.
std::string to_json(const PipelineConfig& config);
/// Throws ConfigError for the first violated constraint.
void validate(const PipelineConfig& config);

/// Environment named by the config.
std::unique_ptr<env::Env> make_env(const EnvSection& section);
env::MazeLayout resolve_layout(const EnvSection& section);

}  // namespace vmg::config

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vmg/dataset.hpp"
#include "vmg/envs.hpp"
#include "vmg/graph.hpp"
#include "vmg/metric.hpp"
#include "vmg/planner.hpp"
#include "vmg/translator.hpp"

namespace vmg::agent {

using Vector = Eigen::VectorXd;
using ActionBounds = std::vector<std::pair<double, double>>;

struct Decision {
  std::size_t current_vertex = 0;
  std::size_t target_vertex = 0;
  Vector action;
};

/// Graph-planning policy: encode, locate, plan on the graph, translate.
///
/// Neural models and the graph are shared between copies; an Agent is never
/// mutated after construction, so concurrent act() calls are fine.
class Agent {
 public:
  /// Runs value iteration unless `values` is supplied. Throws InvalidArgument
  /// when the graph was built with a different metric model or dimensions disagree.
  Agent(std::shared_ptr<const metric::MetricModel> metric, std::shared_ptr<const graph::MemoryGraph> graph,
        std::shared_ptr<const translator::TranslatorModel> translator, plan::PlanConfig config, ActionBounds bounds,
        std::optional<plan::ValueTable> values = std::nullopt);

  Vector act(const Vector& state) const;
  Decision decide(const Vector& state) const;

  const metric::MetricModel& metric() const { return *metric_; }
  const graph::MemoryGraph& graph() const { return *graph_; }
  const translator::TranslatorModel& translator() const { return *translator_; }
  const plan::ValueTable& values() const { return values_; }
  const plan::EdgeWeights& weights() const { return weights_; }
  const plan::PlanConfig& config() const { return config_; }
  const ActionBounds& bounds() const { return bounds_; }

  std::shared_ptr<const metric::MetricModel> metric_ptr() const { return metric_; }
  std::shared_ptr<const graph::MemoryGraph> graph_ptr() const { return graph_; }
  std::shared_ptr<const translator::TranslatorModel> translator_ptr() const { return translator_; }

  /// Same models and graph with a different planning configuration.
  Agent with_config(plan::PlanConfig config) const;

 private:
  std::shared_ptr<const metric::MetricModel> metric_;
  std::shared_ptr<const graph::MemoryGraph> graph_;
  std::shared_ptr<const translator::TranslatorModel> translator_;
  plan::PlanConfig config_;
  ActionBounds bounds_;
  plan::ValueTable values_;
  plan::EdgeWeights weights_;
};

/// New agent over relabeled rewards: same neural models, vertices and edges;
/// only edge rewards, values and weights are recomputed. Throws
/// InvalidArgument when `dataset` is not the one the graph was built from.
Agent relabel_and_replan(const Agent& agent, const data::Dataset& dataset, const data::RewardFn& reward_fn);

// ---------------------------------------------------------------- evaluation

using Policy = std::function<Vector(const Vector& state)>;
/// Creates a fresh policy for an episode; receives the episode seed.
using PolicyFactory = std::function<Policy(std::uint64_t episode_seed)>;

struct EpisodeResult {
  std::uint64_t seed = 0;
  double episode_return = 0.0;
  bool success = false;
  std::size_t length = 0;
  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

struct ModelResult {
  std::vector<EpisodeResult> episodes;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double return_std = 0.0;  // over episodes
  double mean_length = 0.0;
  double normalized_score = 0.0;
  friend bool operator==(const ModelResult&, const ModelResult&) = default;
};

/// Aggregates use the sample standard deviation across models (0 with one model).
struct EvalReport {
  std::string env_name;
  std::size_t episodes_per_model = 0;
  std::uint64_t seed_base = 0;
  double random_score = 0.0;
  double expert_score = 1.0;
  std::vector<ModelResult> models;
  double success_mean = 0.0;
  double success_std = 0.0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double normalized_mean = 0.0;
  double normalized_std = 0.0;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

double normalized_score(double score, double random_score, double expert_score);

/// Episode i of every model uses seed seed_base + i, so models see paired starts.
/// Errors raised while acting are rethrown as ExecutionError (original nested).
EvalReport evaluate_policies(std::span<const PolicyFactory> models, const env::Env& env, std::size_t n_episodes,
                             std::uint64_t seed_base);
EvalReport evaluate(std::span<const Agent> agents, const env::Env& env, std::size_t n_episodes,
                    std::uint64_t seed_base);

EpisodeResult run_episode(const Policy& policy, env::Env& env, std::uint64_t seed);

/// Uniform random actions within bounds.
PolicyFactory random_policy(const env::EnvSpec& spec);

std::string encode_report(const EvalReport& report);

// ---------------------------------------------------------------- persistence

void save_values(const plan::ValueTable& values, const std::string& path);
plan::ValueTable load_values(const std::string& path);

std::string encode_plan_config(const plan::PlanConfig& config);
plan::PlanConfig decode_plan_config(const std::string& text);

/// One entry per model seed; paths are relative to the bundle file.
struct BundleEntry {
  std::uint64_t seed = 0;
  std::string metric_path;
  std::string translator_path;
  std::string graph_path;
  std::string values_path;  // optional; empty means recompute
};

struct AgentBundle {
  std::string env_name;
  plan::PlanConfig plan;
  std::vector<BundleEntry> entries;
};

void save_bundle(const AgentBundle& bundle, const std::string& path);
AgentBundle load_bundle(const std::string& path);
/// Loads and assembles every agent in the bundle.
std::vector<Agent> load_agents(const std::string& bundle_path, const ActionBounds& bounds);

}  // namespace vmg::agent

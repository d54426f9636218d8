#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmg/dataset.hpp"
#include "vmg/metric.hpp"

namespace vmg::graph {

using nn::Matrix;
using nn::Vector;

/// How per-edge graph rewards are assembled from dataset rewards.
///   avg_with_internal  1/2 R(j1->j1) + R(j1->j2) + 1/2 R(j2->j2), R = mean
///   max, sum           same shape, R = max / sum of the witnessed rewards
///   rm                 R(j1->j2)
///   rm_h               R(j1->j2) + 1/2 R(j2->j2)
///   rm_t               1/2 R(j1->j1) + R(j1->j2)
enum class GraphRewardMode { avg_with_internal, max, sum, rm, rm_h, rm_t };

std::string_view to_string(GraphRewardMode mode);
/// Throws InvalidArgument for unknown names.
GraphRewardMode parse_reward_mode(std::string_view name);
inline constexpr std::array<GraphRewardMode, 6> kAllRewardModes = {
    GraphRewardMode::avg_with_internal, GraphRewardMode::max, GraphRewardMode::sum,
    GraphRewardMode::rm,                GraphRewardMode::rm_h, GraphRewardMode::rm_t};

struct Vertex {
  std::size_t id = 0;
  Vector representative_state;  // first dataset state that opened this vertex
  Vector feature;
};

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Vertex id for every state of every episode chain (episode.state_count() entries each).
struct StateAssignment {
  std::vector<std::vector<std::size_t>> per_episode;

  std::size_t at(std::size_t episode, std::size_t state) const { return per_episode.at(episode).at(state); }
  friend bool operator==(const StateAssignment&, const StateAssignment&) = default;
};

struct VertexSet {
  std::vector<Vertex> vertices;
  StateAssignment assignment;
};

/// Nearest vertex by feature distance, ties to the lowest id. Throws StateError if `vertices` is empty.
std::size_t classify(const Vector& feature, std::span<const Vertex> vertices);

/// Row-stacked features of every chain state, one matrix per episode.
std::vector<Matrix> encode_dataset_states(const metric::MetricModel& model, const data::Dataset& dataset);

/// Greedy single pass in dataset order: a state opens a new vertex iff its
/// distance to every existing vertex feature exceeds gamma_m. All states are
/// then assigned to their nearest vertex.
VertexSet build_vertices(const metric::MetricModel& model, const data::Dataset& dataset, double gamma_m);
VertexSet build_vertices_from_features(std::span<const Matrix> features, const data::Dataset& dataset,
                                       double gamma_m);

/// Distinct (j1, j2), j1 != j2, witnessed by a transition; sorted ascending. Never crosses episodes.
std::vector<Edge> build_edges(const data::Dataset& dataset, const StateAssignment& assignment);

struct RewardComputation {
  std::vector<double> rewards;                       // parallel to edges
  std::vector<std::size_t> edges_missing_internal;   // edge indices where an absent internal term was taken as 0
};

RewardComputation compute_rewards(const data::Dataset& dataset, const StateAssignment& assignment,
                                  std::span<const Edge> edges, GraphRewardMode mode);

struct GraphMetadata {
  std::string model_hash;
  std::string dataset_hash;  // reward-free content hash
  GraphRewardMode reward_mode = GraphRewardMode::avg_with_internal;
  friend bool operator==(const GraphMetadata&, const GraphMetadata&) = default;
};

/// Value Memory Graph: the finite MDP over merged states.
///
/// Immutable once built. Edges are kept sorted by (from, to) so the outgoing
/// edges of a vertex are one contiguous index range.
class MemoryGraph {
 public:
  MemoryGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<double> edge_rewards, double gamma_m,
              StateAssignment assignment, GraphMetadata metadata);

  /// Bare graph without features or assignment; used for planner-only work.
  static MemoryGraph from_edges(std::size_t vertex_count, std::vector<Edge> edges, std::vector<double> edge_rewards);

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& edge_rewards() const { return rewards_; }
  double gamma_m() const { return gamma_m_; }
  const StateAssignment& assignment() const { return assignment_; }
  const GraphMetadata& metadata() const { return metadata_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  /// Edge indices [first, last) leaving `v`.
  std::pair<std::size_t, std::size_t> out_edge_range(std::size_t v) const {
    return {out_offsets_[v], out_offsets_[v + 1]};
  }
  std::optional<std::size_t> find_edge(std::size_t from, std::size_t to) const;

  /// Same structure, new rewards.
  MemoryGraph with_rewards(std::vector<double> edge_rewards, GraphRewardMode mode) const;

  friend bool operator==(const MemoryGraph& a, const MemoryGraph& b);

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<double> rewards_;
  double gamma_m_ = 0.0;
  StateAssignment assignment_;
  GraphMetadata metadata_;
  std::vector<std::size_t> out_offsets_;
};

std::string dataset_structure_hash(const data::Dataset& dataset);

MemoryGraph build_graph(const metric::MetricModel& model, const data::Dataset& dataset, double gamma_m,
                        GraphRewardMode mode = GraphRewardMode::avg_with_internal);

/// Recomputes edge rewards from (possibly relabeled) dataset rewards; structure untouched.
MemoryGraph recompute_rewards(const MemoryGraph& graph, const data::Dataset& dataset, GraphRewardMode mode);

struct GraphStats {
  std::size_t vertex_count = 0;
  std::size_t edge_count = 0;
  std::size_t env_transitions = 0;
  std::size_t graph_transitions = 0;  // transitions whose endpoints lie in different vertices
  double env_per_graph_transition = 0.0;
  double reward_min = 0.0;
  double reward_max = 0.0;
  std::vector<double> histogram_edges;   // bins + 1 boundaries
  std::vector<std::size_t> histogram;    // bins
};

GraphStats graph_stats(const MemoryGraph& graph, const data::Dataset& dataset, std::size_t bins = 10);

/// Exhaustive structural checks; returns human-readable violations (empty when sound).
std::vector<std::string> check_invariants(const MemoryGraph& graph, const metric::MetricModel& model,
                                          const data::Dataset& dataset);

// --- persistence ---
std::string encode_graph(const MemoryGraph& graph);
MemoryGraph decode_graph(const std::string& text);
void save_graph(const MemoryGraph& graph, const std::string& path);
MemoryGraph load_graph(const std::string& path);

/// 2-D coordinates from the top two principal components of the vertex features.
std::vector<std::array<double, 2>> pca_layout(const MemoryGraph& graph);
/// Plot-ready JSON: vertices (id, x, y, optional value) and edges (from, to, reward).
std::string encode_layout(const MemoryGraph& graph, std::span<const double> values = {});

}  // namespace vmg::graph

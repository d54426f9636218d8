#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vmg/graph.hpp"

namespace vmg::plan {

struct ValueTable {
  std::vector<double> values;  // one per vertex
  double discount = 0.0;
  std::size_t iterations_run = 0;
  bool converged = false;
  double last_change = 0.0;  // max |V_k+1 - V_k| at the final sweep
};

inline constexpr double kDefaultTolerance = 1e-9;
inline constexpr std::size_t kDefaultMaxIterations = 10'000;

/// Synchronous Bellman backups V(v) = max over edges v->u of [R_G + discount * V(u)]
/// from V = 0; vertices without outgoing edges stay at 0.
ValueTable value_iteration(const graph::MemoryGraph& graph, double discount, double tolerance = kDefaultTolerance,
                           std::size_t max_iters = kDefaultMaxIterations);

/// max_v |V(v) - max_e [R_G + discount V(u)]| (sinks compare against 0).
double bellman_residual(const graph::MemoryGraph& graph, const std::vector<double>& values, double discount);

/// w(e) = max_e' R_G(e') - R_G(e), parallel to graph.edges().
using EdgeWeights = std::vector<double>;
EdgeWeights compute_edge_weights(const graph::MemoryGraph& graph);

struct PlanConfig {
  std::optional<std::size_t> search_horizon;  // N_s; nullopt = whole reachable set
  std::size_t subgoal_index = 1;              // N_sg
  double discount = 0.8;
  bool greedy = false;                        // one-step argmax instead of search + Dijkstra
};

/// Best-value vertex within `horizon` hops of `current` (current itself at hop 0).
/// Ties: fewer hops, then lower id.
std::size_t best_future_vertex(const graph::MemoryGraph& graph, const std::vector<double>& values, std::size_t current,
                               std::optional<std::size_t> horizon);

/// Minimum-weight directed path [source, ..., target]. Among equal-weight paths
/// the one with fewest hops wins, then the lexicographically smallest id
/// sequence. Throws PlanningError if target is unreachable.
std::vector<std::size_t> shortest_path(const graph::MemoryGraph& graph, const EdgeWeights& weights, std::size_t source,
                                       std::size_t target);

/// Successor u of `current` maximizing R_G + discount V(u) (ties: lower id), or nullopt for a sink.
std::optional<std::size_t> greedy_successor(const graph::MemoryGraph& graph, const std::vector<double>& values,
                                            std::size_t current, double discount);

/// Sub-goal vertex for the translator.
///
/// Default mode: v* = best_future_vertex, path = shortest_path(current, v*),
/// result = path[min(N_sg, len - 1)]. When v* is the current vertex itself and
/// an outgoing edge still carries positive return, the greedy successor is
/// taken so the remaining reward is collected; otherwise the current vertex is
/// returned (hold).
std::size_t select_graph_action(const graph::MemoryGraph& graph, const std::vector<double>& values,
                                const EdgeWeights& weights, std::size_t current, const PlanConfig& config);

}  // namespace vmg::plan

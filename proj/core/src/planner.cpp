#include "vmg/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "vmg/errors.hpp"

namespace vmg::plan {

ValueTable value_iteration(const graph::MemoryGraph& graph, double discount, double tolerance, std::size_t max_iters) {
  if (graph.vertex_count() == 0) throw InvalidArgument("value_iteration: graph is empty");
  if (!(discount > 0.0 && discount < 1.0)) throw InvalidArgument("value_iteration: discount must be in (0, 1)");
  const auto n = graph.vertex_count();
  const auto& edges = graph.edges();
  const auto& rewards = graph.edge_rewards();
  ValueTable table;
  table.discount = discount;
  std::vector<double> v(n, 0.0), next(n, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    double change = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const auto [lo, hi] = graph.out_edge_range(s);
      double best = 0.0;
      if (lo < hi) {
        best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = lo; k < hi; ++k) best = std::max(best, rewards[k] + discount * v[edges[k].to]);
      }
      next[s] = best;
      change = std::max(change, std::abs(best - v[s]));
    }
    v.swap(next);
    table.iterations_run = it + 1;
    table.last_change = change;
    if (change <= tolerance) {
      table.converged = true;
      break;
    }
  }
  table.values = std::move(v);
  return table;
}

double bellman_residual(const graph::MemoryGraph& graph, const std::vector<double>& values, double discount) {
  double worst = 0.0;
  for (std::size_t s = 0; s < graph.vertex_count(); ++s) {
    const auto [lo, hi] = graph.out_edge_range(s);
    double best = 0.0;
    if (lo < hi) {
      best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = lo; k < hi; ++k) {
        best = std::max(best, graph.edge_rewards()[k] + discount * values[graph.edges()[k].to]);
      }
    }
    worst = std::max(worst, std::abs(values[s] - best));
  }
  return worst;
}

EdgeWeights compute_edge_weights(const graph::MemoryGraph& graph) {
  const auto& r = graph.edge_rewards();
  EdgeWeights w(r.size());
  if (r.empty()) return w;
  const double top = *std::max_element(r.begin(), r.end());
  for (std::size_t k = 0; k < r.size(); ++k) w[k] = top - r[k];
  return w;
}

std::size_t best_future_vertex(const graph::MemoryGraph& graph, const std::vector<double>& values, std::size_t current,
                               std::optional<std::size_t> horizon) {
  if (current >= graph.vertex_count()) throw InvalidArgument("best_future_vertex: vertex out of range");
  if (values.size() != graph.vertex_count()) throw InvalidArgument("best_future_vertex: value table size mismatch");
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> hops(graph.vertex_count(), kUnseen);
  std::deque<std::size_t> frontier{current};
  hops[current] = 0;
  std::size_t best = current;
  while (!frontier.empty()) {
    const auto v = frontier.front();
    frontier.pop_front();
    const bool better = values[v] > values[best] ||
                        (values[v] == values[best] && (hops[v] < hops[best] || (hops[v] == hops[best] && v < best)));
    if (better) best = v;
    if (horizon && hops[v] >= *horizon) continue;
    const auto [lo, hi] = graph.out_edge_range(v);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto u = graph.edges()[k].to;
      if (hops[u] == kUnseen) {
        hops[u] = hops[v] + 1;
        frontier.push_back(u);
      }
    }
  }
  return best;
}

std::vector<std::size_t> shortest_path(const graph::MemoryGraph& graph, const EdgeWeights& weights, std::size_t source,
                                       std::size_t target) {
  const auto n = graph.vertex_count();
  if (source >= n || target >= n) throw InvalidArgument("shortest_path: vertex out of range");
  if (weights.size() != graph.edge_count()) throw InvalidArgument("shortest_path: one weight per edge required");
  const auto& edges = graph.edges();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Plain Dijkstra for distances.
  std::vector<double> dist(n, kInf);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (done[v]) continue;
    done[v] = 1;
    const auto [lo, hi] = graph.out_edge_range(v);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto u = edges[k].to;
      const double nd = d + weights[k];
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.push({nd, u});
      }
    }
  }
  if (dist[target] == kInf) {
    throw PlanningError("shortest_path: vertex " + std::to_string(target) + " unreachable from " +
                        std::to_string(source));
  }

  // Among tight edges (dist[v] + w == dist[u]) keep the fewest-hop layering, then walk
  // greedily through the smallest-id successor that still reaches the target.
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  auto tight = [&](std::size_t k) { return dist[edges[k].from] + weights[k] == dist[edges[k].to]; };
  std::vector<std::size_t> hops(n, kUnseen);
  std::vector<std::size_t> order{source};
  hops[source] = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto v = order[i];
    const auto [lo, hi] = graph.out_edge_range(v);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto u = edges[k].to;
      if (hops[u] == kUnseen && tight(k)) {
        hops[u] = hops[v] + 1;
        order.push_back(u);
      }
    }
  }
  if (hops[target] == kUnseen) throw InternalConsistencyError("shortest_path: target lost in tight-edge layering");

  std::vector<char> reaches(n, 0);
  reaches[target] = 1;
  for (std::size_t i = order.size(); i-- > 0;) {
    const auto v = order[i];
    if (hops[v] >= hops[target]) continue;
    const auto [lo, hi] = graph.out_edge_range(v);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto u = edges[k].to;
      if (tight(k) && hops[u] == hops[v] + 1 && reaches[u]) {
        reaches[v] = 1;
        break;
      }
    }
  }

  std::vector<std::size_t> path{source};
  auto v = source;
  while (v != target) {
    const auto [lo, hi] = graph.out_edge_range(v);
    std::size_t next = kUnseen;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto u = edges[k].to;
      if (tight(k) && hops[u] == hops[v] + 1 && reaches[u]) {
        next = u;
        break;  // out edges are sorted by target id
      }
    }
    if (next == kUnseen) throw InternalConsistencyError("shortest_path: path reconstruction failed");
    path.push_back(next);
    v = next;
  }
  return path;
}

std::optional<std::size_t> greedy_successor(const graph::MemoryGraph& graph, const std::vector<double>& values,
                                            std::size_t current, double discount) {
  const auto [lo, hi] = graph.out_edge_range(current);
  if (lo == hi) return std::nullopt;
  std::size_t best = graph.edges()[lo].to;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t k = lo; k < hi; ++k) {
    const auto u = graph.edges()[k].to;
    const double q = graph.edge_rewards()[k] + discount * values[u];
    if (q > best_q) {
      best_q = q;
      best = u;
    }
  }
  return best;
}

std::size_t select_graph_action(const graph::MemoryGraph& graph, const std::vector<double>& values,
                                const EdgeWeights& weights, std::size_t current, const PlanConfig& config) {
  if (config.subgoal_index == 0) throw InvalidArgument("select_graph_action: N_sg must be >= 1");
  if (current >= graph.vertex_count()) throw InvalidArgument("select_graph_action: vertex out of range");
  if (values.size() != graph.vertex_count()) throw InvalidArgument("select_graph_action: value table size mismatch");

  if (config.greedy) return greedy_successor(graph, values, current, config.discount).value_or(current);

  const auto goal = best_future_vertex(graph, values, current, config.search_horizon);
  if (goal == current) {
    const auto step = greedy_successor(graph, values, current, config.discount);
    if (step) {
      const auto k = *graph.find_edge(current, *step);
      if (graph.edge_rewards()[k] + config.discount * values[*step] > 0.0) return *step;
    }
    return current;
  }
  std::vector<std::size_t> path;
  try {
    path = shortest_path(graph, weights, current, goal);
  } catch (const PlanningError&) {
    return greedy_successor(graph, values, current, config.discount).value_or(current);
  }
  return path[std::min(config.subgoal_index, path.size() - 1)];
}

}  // namespace vmg::plan

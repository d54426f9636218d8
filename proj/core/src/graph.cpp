#include "vmg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vmg/errors.hpp"
#include "vmg/hash.hpp"

namespace vmg::graph {

std::string_view to_string(GraphRewardMode mode) {
  switch (mode) {
    case GraphRewardMode::avg_with_internal: return "avg_with_internal";
    case GraphRewardMode::max: return "max";
    case GraphRewardMode::sum: return "sum";
    case GraphRewardMode::rm: return "rm";
    case GraphRewardMode::rm_h: return "rm_h";
    case GraphRewardMode::rm_t: return "rm_t";
  }
  return "unknown";
}

GraphRewardMode parse_reward_mode(std::string_view name) {
  for (auto m : kAllRewardModes) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown reward mode '" + std::string(name) +
                        "' (expected avg_with_internal, max, sum, rm, rm_h or rm_t)");
}

std::size_t classify(const Vector& feature, std::span<const Vertex> vertices) {
  if (vertices.empty()) throw StateError("classify: vertex list is empty");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < vertices.size(); ++j) {
    if (vertices[j].feature.size() != feature.size()) throw InvalidArgument("classify: feature dimension mismatch");
    const double d = (feature - vertices[j].feature).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return vertices[best].id;
}

std::vector<Matrix> encode_dataset_states(const metric::MetricModel& model, const data::Dataset& dataset) {
  // Row by row through encode_state so features are bit-identical to act-time encoding
  // (a batched product may round differently).
  std::vector<Matrix> out;
  out.reserve(dataset.episodes().size());
  for (const auto& ep : dataset.episodes()) {
    Matrix f(static_cast<Eigen::Index>(ep.state_count()), static_cast<Eigen::Index>(model.metric_dim));
    for (std::size_t i = 0; i < ep.state_count(); ++i) {
      f.row(static_cast<Eigen::Index>(i)) = metric::encode_state(model, ep.state(i)).transpose();
    }
    out.push_back(std::move(f));
  }
  return out;
}

VertexSet build_vertices_from_features(std::span<const Matrix> features, const data::Dataset& dataset,
                                       double gamma_m) {
  if (!(gamma_m > 0.0)) throw InvalidArgument("build_vertices: gamma_m must be > 0");
  if (features.size() != dataset.episodes().size()) throw InvalidArgument("build_vertices: one feature block per episode");
  VertexSet out;
  const auto d = features.empty() ? 0 : features[0].cols();
  Matrix centers(0, d);  // vertex features, one per row
  std::size_t count = 0;

  auto nearest = [&](const auto& f) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < count; ++j) {
      const double dist = (centers.row(static_cast<Eigen::Index>(j)) - f).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    return std::pair{best, best_d};
  };

  for (std::size_t e = 0; e < features.size(); ++e) {
    const auto& ep = dataset.episodes()[e];
    if (static_cast<std::size_t>(features[e].rows()) != ep.state_count()) {
      throw InvalidArgument("build_vertices: feature rows must match episode state count");
    }
    for (std::size_t i = 0; i < ep.state_count(); ++i) {
      const auto f = features[e].row(static_cast<Eigen::Index>(i));
      if (count > 0 && std::sqrt(nearest(f).second) <= gamma_m) continue;
      if (count == static_cast<std::size_t>(centers.rows())) {
        centers.conservativeResize(std::max<Eigen::Index>(16, 2 * centers.rows()), d);
      }
      centers.row(static_cast<Eigen::Index>(count)) = f;
      out.vertices.push_back(Vertex{count, ep.state(i), f.transpose()});
      ++count;
    }
  }

  out.assignment.per_episode.resize(features.size());
  for (std::size_t e = 0; e < features.size(); ++e) {
    auto& row = out.assignment.per_episode[e];
    row.resize(static_cast<std::size_t>(features[e].rows()));
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = nearest(features[e].row(static_cast<Eigen::Index>(i))).first;
  }
  return out;
}

VertexSet build_vertices(const metric::MetricModel& model, const data::Dataset& dataset, double gamma_m) {
  const auto features = encode_dataset_states(model, dataset);
  return build_vertices_from_features(features, dataset, gamma_m);
}

std::vector<Edge> build_edges(const data::Dataset& dataset, const StateAssignment& assignment) {
  if (assignment.per_episode.size() != dataset.episodes().size()) {
    throw InvalidArgument("build_edges: assignment does not cover the dataset");
  }
  std::vector<Edge> edges;
  for (std::size_t e = 0; e < dataset.episodes().size(); ++e) {
    const auto& row = assignment.per_episode[e];
    if (row.size() != dataset.episodes()[e].state_count()) {
      throw InvalidArgument("build_edges: assignment does not cover episode " + std::to_string(e));
    }
    for (std::size_t t = 0; t + 1 < row.size(); ++t) {
      if (row[t] != row[t + 1]) edges.push_back({row[t], row[t + 1]});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

namespace {

struct RewardStats {
  double sum = 0.0;
  double max = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;

  void add(double r) {
    sum += r;
    max = std::max(max, r);
    ++count;
  }
  double aggregate(GraphRewardMode mode) const {
    if (count == 0) return 0.0;
    switch (mode) {
      case GraphRewardMode::max: return max;
      case GraphRewardMode::sum: return sum;
      default: return sum / static_cast<double>(count);
    }
  }
};

}  // namespace

RewardComputation compute_rewards(const data::Dataset& dataset, const StateAssignment& assignment,
                                  std::span<const Edge> edges, GraphRewardMode mode) {
  std::size_t vertex_bound = 0;
  for (const auto& row : assignment.per_episode) {
    for (auto v : row) vertex_bound = std::max(vertex_bound, v + 1);
  }
  for (const auto& e : edges) vertex_bound = std::max({vertex_bound, e.from + 1, e.to + 1});

  std::vector<RewardStats> internal(vertex_bound);
  std::vector<RewardStats> across(edges.size());
  for (std::size_t ei = 0; ei < dataset.episodes().size(); ++ei) {
    const auto& ep = dataset.episodes()[ei];
    const auto& row = assignment.per_episode.at(ei);
    for (std::size_t t = 0; t < ep.size(); ++t) {
      const Edge key{row[t], row[t + 1]};
      if (key.from == key.to) {
        internal[key.from].add(ep[t].reward);
        continue;
      }
      const auto it = std::lower_bound(edges.begin(), edges.end(), key);
      if (it != edges.end() && *it == key) across[static_cast<std::size_t>(it - edges.begin())].add(ep[t].reward);
    }
  }

  const bool head = mode != GraphRewardMode::rm && mode != GraphRewardMode::rm_h;
  const bool tail = mode != GraphRewardMode::rm && mode != GraphRewardMode::rm_t;
  RewardComputation out;
  out.rewards.resize(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (across[k].count == 0) {
      throw InternalConsistencyError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                     " has no witnessing transition");
    }
    double r = across[k].aggregate(mode);
    bool missing = false;
    if (head) {
      r += 0.5 * internal[e.from].aggregate(mode);
      missing |= internal[e.from].count == 0;
    }
    if (tail) {
      r += 0.5 * internal[e.to].aggregate(mode);
      missing |= internal[e.to].count == 0;
    }
    out.rewards[k] = r;
    if (missing) out.edges_missing_internal.push_back(k);
  }
  return out;
}

MemoryGraph::MemoryGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, std::vector<double> edge_rewards,
                         double gamma_m, StateAssignment assignment, GraphMetadata metadata)
    : vertices_(std::move(vertices)),
      edges_(std::move(edges)),
      rewards_(std::move(edge_rewards)),
      gamma_m_(gamma_m),
      assignment_(std::move(assignment)),
      metadata_(std::move(metadata)) {
  if (rewards_.size() != edges_.size()) throw InvalidArgument("memory graph: one reward per edge required");
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (vertices_[i].id != i) throw InvalidArgument("memory graph: vertex ids must be 0..n-1 in order");
  }
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = edges_[k];
    if (e.from >= vertices_.size() || e.to >= vertices_.size()) throw InvalidArgument("memory graph: edge endpoint out of range");
    if (e.from == e.to) throw InvalidArgument("memory graph: self-edge " + std::to_string(e.from));
    if (k > 0 && !(edges_[k - 1] < e)) throw InvalidArgument("memory graph: edges must be sorted and distinct");
  }
  out_offsets_.assign(vertices_.size() + 1, 0);
  for (const auto& e : edges_) ++out_offsets_[e.from + 1];
  for (std::size_t v = 0; v < vertices_.size(); ++v) out_offsets_[v + 1] += out_offsets_[v];
}

MemoryGraph MemoryGraph::from_edges(std::size_t vertex_count, std::vector<Edge> edges, std::vector<double> edge_rewards) {
  std::vector<Vertex> vertices(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) vertices[i].id = i;
  // Sort edges and keep rewards aligned.
  std::vector<std::size_t> order(edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return edges[a] < edges[b]; });
  std::vector<Edge> sorted_edges;
  std::vector<double> sorted_rewards;
  for (auto i : order) {
    sorted_edges.push_back(edges[i]);
    sorted_rewards.push_back(edge_rewards.at(i));
  }
  return MemoryGraph(std::move(vertices), std::move(sorted_edges), std::move(sorted_rewards), 0.0, {}, {});
}

std::optional<std::size_t> MemoryGraph::find_edge(std::size_t from, std::size_t to) const {
  if (from >= vertices_.size()) return std::nullopt;
  const auto [lo, hi] = out_edge_range(from);
  const auto first = edges_.begin() + static_cast<std::ptrdiff_t>(lo);
  const auto last = edges_.begin() + static_cast<std::ptrdiff_t>(hi);
  const auto it = std::lower_bound(first, last, Edge{from, to});
  if (it != last && it->to == to) return static_cast<std::size_t>(it - edges_.begin());
  return std::nullopt;
}

MemoryGraph MemoryGraph::with_rewards(std::vector<double> edge_rewards, GraphRewardMode mode) const {
  GraphMetadata meta = metadata_;
  meta.reward_mode = mode;
  return MemoryGraph(vertices_, edges_, std::move(edge_rewards), gamma_m_, assignment_, std::move(meta));
}

bool operator==(const MemoryGraph& a, const MemoryGraph& b) {
  if (a.vertices_.size() != b.vertices_.size()) return false;
  for (std::size_t i = 0; i < a.vertices_.size(); ++i) {
    const auto& x = a.vertices_[i];
    const auto& y = b.vertices_[i];
    if (x.id != y.id || x.representative_state.size() != y.representative_state.size() ||
        x.representative_state != y.representative_state || x.feature.size() != y.feature.size() ||
        x.feature != y.feature) {
      return false;
    }
  }
  return a.edges_ == b.edges_ && a.rewards_ == b.rewards_ && a.gamma_m_ == b.gamma_m_ &&
         a.assignment_ == b.assignment_ && a.metadata_ == b.metadata_;
}

std::string dataset_structure_hash(const data::Dataset& dataset) {
  const auto zeroed = data::relabel_rewards(dataset, [](const auto&, const auto&, const auto&) { return 0.0; });
  const auto bytes = data::encode_binary(zeroed);
  return sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

MemoryGraph build_graph(const metric::MetricModel& model, const data::Dataset& dataset, double gamma_m,
                        GraphRewardMode mode) {
  auto vs = build_vertices(model, dataset, gamma_m);
  auto edges = build_edges(dataset, vs.assignment);
  auto rewards = compute_rewards(dataset, vs.assignment, edges, mode);
  GraphMetadata meta{metric::model_hash(model), dataset_structure_hash(dataset), mode};
  return MemoryGraph(std::move(vs.vertices), std::move(edges), std::move(rewards.rewards), gamma_m,
                     std::move(vs.assignment), std::move(meta));
}

MemoryGraph recompute_rewards(const MemoryGraph& graph, const data::Dataset& dataset, GraphRewardMode mode) {
  auto rewards = compute_rewards(dataset, graph.assignment(), graph.edges(), mode);
  return graph.with_rewards(std::move(rewards.rewards), mode);
}

GraphStats graph_stats(const MemoryGraph& graph, const data::Dataset& dataset, std::size_t bins) {
  GraphStats s;
  s.vertex_count = graph.vertex_count();
  s.edge_count = graph.edge_count();
  const auto& asg = graph.assignment().per_episode;
  for (std::size_t e = 0; e < dataset.episodes().size(); ++e) {
    const auto& row = asg.at(e);
    for (std::size_t t = 0; t + 1 < row.size(); ++t) {
      ++s.env_transitions;
      if (row[t] != row[t + 1]) ++s.graph_transitions;
    }
  }
  s.env_per_graph_transition = s.graph_transitions == 0
                                   ? std::numeric_limits<double>::infinity()
                                   : static_cast<double>(s.env_transitions) / static_cast<double>(s.graph_transitions);
  const auto& r = graph.edge_rewards();
  if (!r.empty() && bins > 0) {
    s.reward_min = *std::min_element(r.begin(), r.end());
    s.reward_max = *std::max_element(r.begin(), r.end());
    const double width = (s.reward_max - s.reward_min) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) s.histogram_edges.push_back(s.reward_min + width * static_cast<double>(b));
    s.histogram.assign(bins, 0);
    for (double x : r) {
      std::size_t b = width > 0.0 ? static_cast<std::size_t>((x - s.reward_min) / width) : 0;
      s.histogram[std::min(b, bins - 1)] += 1;
    }
  }
  return s;
}

std::vector<std::string> check_invariants(const MemoryGraph& graph, const metric::MetricModel& model,
                                          const data::Dataset& dataset) {
  std::vector<std::string> bad;
  const double gamma = graph.gamma_m();
  const auto& vs = graph.vertices();
  for (std::size_t a = 0; a < vs.size(); ++a) {
    const Vector f = metric::encode_state(model, vs[a].representative_state);
    if (f != vs[a].feature) bad.push_back("vertex " + std::to_string(a) + ": feature differs from encoded state");
    for (std::size_t b = a + 1; b < vs.size(); ++b) {
      const double d = std::sqrt((vs[a].feature - vs[b].feature).squaredNorm());
      if (!(d > gamma)) {
        bad.push_back("vertices " + std::to_string(a) + "," + std::to_string(b) + " closer than gamma_m");
      }
    }
  }
  const auto features = encode_dataset_states(model, dataset);
  const auto& asg = graph.assignment().per_episode;
  if (asg.size() != dataset.episodes().size()) {
    bad.push_back("assignment does not cover every episode");
    return bad;
  }
  std::vector<char> witnessed(graph.edge_count(), 0);
  for (std::size_t e = 0; e < features.size(); ++e) {
    const auto& row = asg[e];
    if (row.size() != static_cast<std::size_t>(features[e].rows())) {
      bad.push_back("episode " + std::to_string(e) + ": assignment length mismatch");
      continue;
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Vector f = features[e].row(static_cast<Eigen::Index>(i)).transpose();
      if (row[i] >= vs.size()) {
        bad.push_back("episode " + std::to_string(e) + " state " + std::to_string(i) + ": unknown vertex");
        continue;
      }
      const double d = std::sqrt((f - vs[row[i]].feature).squaredNorm());
      if (d > gamma) {
        bad.push_back("episode " + std::to_string(e) + " state " + std::to_string(i) + ": not covered by its vertex");
      }
      if (classify(f, vs) != row[i]) {
        bad.push_back("episode " + std::to_string(e) + " state " + std::to_string(i) + ": not assigned to nearest vertex");
      }
      if (i + 1 < row.size() && row[i] != row[i + 1]) {
        if (auto k = graph.find_edge(row[i], row[i + 1])) {
          witnessed[*k] = 1;
        } else {
          bad.push_back("episode " + std::to_string(e) + " step " + std::to_string(i) + ": transition has no edge");
        }
      }
    }
  }
  for (std::size_t k = 0; k < graph.edge_count(); ++k) {
    const auto& e = graph.edges()[k];
    if (e.from == e.to) bad.push_back("self-edge at " + std::to_string(e.from));
    if (k > 0 && !(graph.edges()[k - 1] < e)) bad.push_back("duplicate or unsorted edge at index " + std::to_string(k));
    if (!witnessed[k]) bad.push_back("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) + " has no witness");
  }
  return bad;
}

std::vector<std::array<double, 2>> pca_layout(const MemoryGraph& graph) {
  const auto n = graph.vertex_count();
  std::vector<std::array<double, 2>> out(n, {0.0, 0.0});
  if (n == 0) return out;
  const auto d = graph.vertices()[0].feature.size();
  if (d == 0) return out;
  Matrix f(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) f.row(static_cast<Eigen::Index>(i)) = graph.vertices()[i].feature.transpose();
  const Eigen::RowVectorXd mean = f.colwise().mean();
  f.rowwise() -= mean;
  const Eigen::MatrixXd cov = (f.transpose() * f) / std::max<double>(1.0, static_cast<double>(n) - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd& vecs = eig.eigenvectors();  // ascending eigenvalues
  for (int c = 0; c < 2 && c < d; ++c) {
    Eigen::VectorXd axis = vecs.col(d - 1 - c);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    const Eigen::VectorXd proj = f * axis;
    for (std::size_t i = 0; i < n; ++i) out[i][static_cast<std::size_t>(c)] = proj(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace vmg::graph

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "vmg/tape.hpp"

namespace vmg::oracle {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

GradCheck check_net_gradient(nn::Mlp& net, const nn::MlpGrads& analytic, const std::function<double()>& loss,
                             double h, std::optional<std::size_t> max_params, std::uint64_t subset_seed) {
  std::vector<double*> params;
  net.for_each_parameter([&](double& p) { params.push_back(&p); });
  std::vector<double> grads;
  analytic.for_each([&](double g) { grads.push_back(g); });
  if (params.size() != grads.size()) throw std::logic_error("gradient check: parameter/gradient count differ");

  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (max_params && *max_params < idx.size()) {
    std::mt19937_64 rng(subset_seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(*max_params);
  }
  GradCheck out;
  auto rel = [](double numeric, double analytic) {
    return std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), kGradFloor});
  };
  const double base = loss();
  for (auto i : idx) {
    double& p = *params[i];
    const double saved = p;
    auto central = [&](double step, double* fwd, double* bwd) {
      p = saved + step;
      const double up = loss();
      p = saved - step;
      const double down = loss();
      p = saved;
      if (fwd) *fwd = (up - base) / step;
      if (bwd) *bwd = (base - down) / step;
      return (up - down) / (2.0 * step);
    };
    double fwd = 0.0, bwd = 0.0;
    double err = rel(central(h, &fwd, &bwd), grads[i]);
    if (err >= 1e-4 && rel(fwd, bwd) >= 1e-2) {
      ++out.kinks;
      err = rel(central(h / 100.0, nullptr, nullptr), grads[i]);
    }
    out.max_rel_error = std::max(out.max_rel_error, err);
    ++out.checked;
  }
  return out;
}

GradCheck merge(const GradCheck& a, const GradCheck& b) {
  return {std::max(a.max_rel_error, b.max_rel_error), a.checked + b.checked, a.kinks + b.kinks};
}

metric::MetricModel small_metric_model(std::size_t state_dim, std::size_t action_dim, std::size_t metric_dim,
                                       double margin, std::size_t hidden, std::mt19937_64& rng) {
  metric::MetricModel m;
  const std::size_t ws[] = {state_dim, hidden, hidden, metric_dim};
  const std::size_t wa[] = {metric_dim + action_dim, hidden, hidden, metric_dim};
  const std::size_t wd[] = {2 * metric_dim, hidden, hidden, action_dim};
  m.state_encoder = nn::Mlp::with_widths(ws, rng);
  m.action_encoder = nn::Mlp::with_widths(wa, rng);
  m.action_decoder = nn::Mlp::with_widths(wd, rng);
  m.metric_dim = metric_dim;
  m.margin = margin;
  return m;
}

translator::TranslatorModel small_translator(std::size_t state_dim, std::size_t action_dim, std::size_t hidden,
                                             std::mt19937_64& rng) {
  translator::TranslatorModel t;
  const std::size_t w[] = {2 * state_dim, hidden, hidden, action_dim};
  t.net = nn::Mlp::with_widths(w, rng);
  t.horizon = 10;
  return t;
}

namespace {

constexpr double kStep = 1e-5;

// Two small nets feeding a loss head; gradients flow through both.
struct TwoNets {
  nn::Mlp a, b;
  Matrix xa, xb;
};

TwoNets make_two_nets(std::uint64_t seed, std::size_t in_a, std::size_t in_b, std::size_t out) {
  std::mt19937_64 rng(seed);
  TwoNets t;
  const std::size_t wa[] = {in_a, 12, 12, out};
  const std::size_t wb[] = {in_b, 12, 12, out};
  t.a = nn::Mlp::with_widths(wa, rng);
  t.b = nn::Mlp::with_widths(wb, rng);
  t.xa = random_matrix(6, in_a, rng);
  t.xb = random_matrix(6, in_b, rng);
  return t;
}

template <typename Head>
GradCheck two_net_check(TwoNets& t, Head head) {
  auto ga = nn::MlpGrads::zeros_like(t.a);
  auto gb = nn::MlpGrads::zeros_like(t.b);
  {
    nn::Tape tape;
    const auto l = head(tape, tape.mlp(t.a, &ga, tape.constant(t.xa)), tape.mlp(t.b, &gb, tape.constant(t.xb)));
    tape.backward(l);
  }
  auto value = [&] {
    nn::Tape tape;
    const auto l = head(tape, tape.mlp(t.a, nullptr, tape.constant(t.xa)), tape.mlp(t.b, nullptr, tape.constant(t.xb)));
    return tape.scalar(l);
  };
  return merge(check_net_gradient(t.a, ga, value, kStep), check_net_gradient(t.b, gb, value, kStep));
}

}  // namespace

GradCheck contrastive_gradient_check(std::uint64_t seed) {
  auto t = make_two_nets(seed, 3, 3, 4);
  // Margin large enough that some hinge pairs are active and some are not.
  return two_net_check(t, [](nn::Tape& tape, nn::Var p, nn::Var q) { return metric::contrastive_loss(tape, p, q, 0.5); });
}

GradCheck action_gradient_check(std::uint64_t seed) {
  auto t = make_two_nets(seed, 4, 3, 2);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Matrix action = random_matrix(6, 2, rng);
  return two_net_check(t, [&](nn::Tape& tape, nn::Var decoded, nn::Var delta) {
    return metric::action_loss(tape, decoded, tape.constant(action), delta, 0.3);
  });
}

GradCheck metric_gradient_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto model = small_metric_model(3, 2, 4, 1.0, 10, rng);
  metric::TransitionBatch batch{random_matrix(6, 3, rng), random_matrix(6, 2, rng), random_matrix(6, 3, rng)};
  auto grads = metric::MetricGrads::zeros_like(model);
  {
    nn::Tape tape;
    tape.backward(metric::record_metric_loss(tape, model, &grads, batch).total);
  }
  auto value = [&] { return metric::metric_loss(model, batch).total; };
  auto r = check_net_gradient(model.state_encoder, grads.state_encoder, value, kStep);
  r = merge(r, check_net_gradient(model.action_encoder, grads.action_encoder, value, kStep));
  return merge(r, check_net_gradient(model.action_decoder, grads.action_decoder, value, kStep));
}

GradCheck full_size_metric_gradient_check(std::uint64_t seed, std::size_t params_per_net) {
  std::mt19937_64 rng(seed);
  auto model = metric::MetricModel::create(2, 2, 10, 1.0, rng);
  metric::TransitionBatch batch{random_matrix(8, 2, rng), random_matrix(8, 2, rng), random_matrix(8, 2, rng)};
  auto grads = metric::MetricGrads::zeros_like(model);
  {
    nn::Tape tape;
    tape.backward(metric::record_metric_loss(tape, model, &grads, batch).total);
  }
  auto value = [&] { return metric::metric_loss(model, batch).total; };
  auto r = check_net_gradient(model.state_encoder, grads.state_encoder, value, kStep, params_per_net, seed);
  r = merge(r, check_net_gradient(model.action_encoder, grads.action_encoder, value, kStep, params_per_net, seed + 1));
  return merge(r, check_net_gradient(model.action_decoder, grads.action_decoder, value, kStep, params_per_net, seed + 2));
}

GradCheck translator_gradient_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto model = small_translator(3, 2, 12, rng);
  translator::PairBatch batch{random_matrix(6, 3, rng), random_matrix(6, 3, rng), random_matrix(6, 2, rng)};
  auto grads = nn::MlpGrads::zeros_like(model.net);
  {
    nn::Tape tape;
    tape.backward(translator::record_translator_loss(tape, model, &grads, batch));
  }
  auto value = [&] { return translator::translator_loss(model, batch); };
  return check_net_gradient(model.net, grads, value, kStep);
}

// ------------------------------------------------------------------ loss values

double contrastive_value(const Matrix& predicted, const Matrix& target, double margin) {
  const auto n = predicted.rows();
  double pos = 0.0, neg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < predicted.cols(); ++k) {
        const double diff = predicted(i, k) - target(j, k);
        d2 += diff * diff;
      }
      if (i == j) {
        pos += d2;
      } else {
        neg += std::max(margin - d2, 0.0);
      }
    }
  }
  return pos / static_cast<double>(n) + neg / static_cast<double>(n * (n - 1));
}

double action_value(const Matrix& decoded, const Matrix& action, const Matrix& transition, double margin) {
  const auto n = decoded.rows();
  double recon = 0.0, length = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < decoded.cols(); ++k) {
      const double diff = decoded(i, k) - action(i, k);
      recon += diff * diff;
    }
    double sq = 0.0;
    for (Eigen::Index k = 0; k < transition.cols(); ++k) sq += transition(i, k) * transition(i, k);
    length += std::max(std::sqrt(sq) - margin, 0.0);
  }
  return (recon + length) / static_cast<double>(n);
}

double translator_value(const Matrix& predicted, const Matrix& action) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
    for (Eigen::Index k = 0; k < predicted.cols(); ++k) {
      const double diff = predicted(i, k) - action(i, k);
      total += diff * diff;
    }
  }
  return total / static_cast<double>(predicted.rows());
}

Vector mlp_value(const nn::Mlp& net, const Vector& input) {
  std::vector<double> x(input.data(), input.data() + input.size());
  for (const auto& layer : net.layers()) {
    std::vector<double> y(static_cast<std::size_t>(layer.weight.rows()));
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      double acc = layer.bias(o);
      for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) acc += layer.weight(o, i) * x[static_cast<std::size_t>(i)];
      if (layer.activation == nn::Activation::relu && acc < 0.0) acc = 0.0;
      y[static_cast<std::size_t>(o)] = acc;
    }
    x = std::move(y);
  }
  return Eigen::Map<Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// ------------------------------------------------------------------- datasets

data::Dataset dataset_from_chains(const std::vector<std::vector<Vector>>& chains,
                                  const std::vector<std::vector<double>>& rewards, std::size_t action_dim) {
  std::vector<data::Episode> episodes;
  std::size_t state_dim = 0;
  for (std::size_t e = 0; e < chains.size(); ++e) {
    std::vector<data::Transition> ts;
    for (std::size_t t = 0; t + 1 < chains[e].size(); ++t) {
      data::Transition tr;
      tr.state = chains[e][t];
      tr.next_state = chains[e][t + 1];
      tr.action = Vector::Zero(static_cast<Eigen::Index>(action_dim));
      tr.reward = rewards.empty() ? 0.0 : rewards.at(e).at(t);
      ts.push_back(std::move(tr));
    }
    state_dim = static_cast<std::size_t>(chains[e][0].size());
    episodes.emplace_back(std::move(ts));
  }
  return data::Dataset(std::move(episodes), state_dim, action_dim);
}

// ------------------------------------------------------------------------ graph

std::size_t nearest_vertex(const Vector& feature, const std::vector<Vector>& vertex_features) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < vertex_features.size(); ++j) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < feature.size(); ++k) {
      const double diff = feature(k) - vertex_features[j](k);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

std::vector<graph::Edge> witnessed_edges(const data::Dataset& dataset, const graph::StateAssignment& assignment,
                                         std::size_t vertex_count) {
  std::vector<graph::Edge> out;
  for (std::size_t a = 0; a < vertex_count; ++a) {
    for (std::size_t b = 0; b < vertex_count; ++b) {
      if (a == b) continue;
      bool seen = false;
      for (std::size_t e = 0; e < dataset.episodes().size() && !seen; ++e) {
        for (std::size_t t = 0; t < dataset.episodes()[e].size(); ++t) {
          if (assignment.at(e, t) == a && assignment.at(e, t + 1) == b) {
            seen = true;
            break;
          }
        }
      }
      if (seen) out.push_back({a, b});
    }
  }
  return out;
}

std::vector<double> graph_rewards(const data::Dataset& dataset, const graph::StateAssignment& assignment,
                                  const std::vector<graph::Edge>& edges, graph::GraphRewardMode mode) {
  using graph::GraphRewardMode;
  // Collect the witnessed rewards for every ordered vertex pair, self pairs included.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> witnessed;
  for (std::size_t e = 0; e < dataset.episodes().size(); ++e) {
    const auto& ep = dataset.episodes()[e];
    for (std::size_t t = 0; t < ep.size(); ++t) {
      witnessed[{assignment.at(e, t), assignment.at(e, t + 1)}].push_back(ep[t].reward);
    }
  }
  auto aggregate = [&](std::size_t a, std::size_t b) -> double {
    const auto it = witnessed.find({a, b});
    if (it == witnessed.end() || it->second.empty()) return 0.0;
    const auto& r = it->second;
    switch (mode) {
      case GraphRewardMode::max:
        return *std::max_element(r.begin(), r.end());
      case GraphRewardMode::sum:
        return std::accumulate(r.begin(), r.end(), 0.0);
      default:
        return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    }
  };
  std::vector<double> out;
  for (const auto& e : edges) {
    const double head = aggregate(e.from, e.from);
    const double move = aggregate(e.from, e.to);
    const double tail = aggregate(e.to, e.to);
    switch (mode) {
      case GraphRewardMode::rm:
        out.push_back(move);
        break;
      case GraphRewardMode::rm_h:
        out.push_back(move + 0.5 * tail);
        break;
      case GraphRewardMode::rm_t:
        out.push_back(0.5 * head + move);
        break;
      default:
        out.push_back(0.5 * head + move + 0.5 * tail);
    }
  }
  return out;
}

std::vector<std::string> graph_violations(const graph::MemoryGraph& graph, const std::vector<Matrix>& features,
                                          const data::Dataset& dataset) {
  std::vector<std::string> out;
  auto say = [&](const std::string& s) {
    if (out.size() < 20) out.push_back(s);
  };
  const double gm = graph.gamma_m();
  std::vector<Vector> vf;
  for (const auto& v : graph.vertices()) vf.push_back(v.feature);

  for (std::size_t i = 0; i < vf.size(); ++i) {
    for (std::size_t j = i + 1; j < vf.size(); ++j) {
      const double d = (vf[i] - vf[j]).norm();
      if (!(d > gm)) say("vertices " + std::to_string(i) + " and " + std::to_string(j) + " within gamma_m");
    }
  }
  for (std::size_t e = 0; e < features.size(); ++e) {
    for (Eigen::Index s = 0; s < features[e].rows(); ++s) {
      const Vector f = features[e].row(s).transpose();
      const auto assigned = graph.assignment().at(e, static_cast<std::size_t>(s));
      const auto nearest = nearest_vertex(f, vf);
      if ((f - vf[assigned]).norm() > gm) {
        say("state " + std::to_string(e) + ":" + std::to_string(s) + " farther than gamma_m from its vertex");
      }
      if ((f - vf[assigned]).squaredNorm() > (f - vf[nearest]).squaredNorm()) {
        say("state " + std::to_string(e) + ":" + std::to_string(s) + " not assigned to its nearest vertex");
      }
    }
  }
  for (const auto& edge : graph.edges()) {
    if (edge.from == edge.to) say("self-edge at " + std::to_string(edge.from));
  }
  const auto expected = witnessed_edges(dataset, graph.assignment(), graph.vertex_count());
  if (expected != graph.edges()) say("edge set differs from the witnessed transitions");
  return out;
}

// ---------------------------------------------------------------------- planner

graph::MemoryGraph random_graph(const RandomGraphSpec& spec, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(spec.edge_probability);
  std::uniform_real_distribution<double> reward(spec.reward_lo, spec.reward_hi);
  std::vector<graph::Edge> edges;
  std::vector<double> rewards;
  for (std::size_t a = 0; a < spec.vertices; ++a) {
    for (std::size_t b = 0; b < spec.vertices; ++b) {
      if (a == b || !coin(rng)) continue;
      double r = reward(rng);
      if (spec.dyadic_bits) {
        const double scale = std::ldexp(1.0, *spec.dyadic_bits);
        r = std::round(r * scale) / scale;
      }
      edges.push_back({a, b});
      rewards.push_back(r);
    }
  }
  return graph::MemoryGraph::from_edges(spec.vertices, std::move(edges), std::move(rewards));
}

std::optional<std::vector<double>> policy_enumeration_values(const graph::MemoryGraph& graph, double discount,
                                                             std::size_t max_policies) {
  const auto n = graph.vertex_count();
  std::vector<std::size_t> degree(n);
  double count = 1.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto [lo, hi] = graph.out_edge_range(v);
    degree[v] = hi - lo;
    count *= static_cast<double>(std::max<std::size_t>(degree[v], 1));
  }
  if (count > static_cast<double>(max_policies)) return std::nullopt;

  std::vector<double> best(n, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> choice(n, 0);
  while (true) {
    // (I - discount P) V = r under this policy; sinks contribute V = 0.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v) {
      if (degree[v] == 0) continue;
      const auto k = graph.out_edge_range(v).first + choice[v];
      a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(graph.edges()[k].to)) -= discount;
      r(static_cast<Eigen::Index>(v)) = graph.edge_rewards()[k];
    }
    const Eigen::VectorXd values = a.partialPivLu().solve(r);
    for (std::size_t v = 0; v < n; ++v) best[v] = std::max(best[v], values(static_cast<Eigen::Index>(v)));

    std::size_t v = 0;
    for (; v < n; ++v) {
      if (degree[v] == 0) continue;
      if (++choice[v] < degree[v]) break;
      choice[v] = 0;
    }
    if (v == n) break;
  }
  return best;
}

namespace {

double walk_value(const graph::MemoryGraph& graph, double discount, std::size_t v, std::size_t depth) {
  const auto [lo, hi] = graph.out_edge_range(v);
  if (depth == 0 || lo == hi) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (auto k = lo; k < hi; ++k) {
    best = std::max(best, graph.edge_rewards()[k] + discount * walk_value(graph, discount, graph.edges()[k].to, depth - 1));
  }
  return best;
}

void enumerate_paths(const graph::MemoryGraph& graph, const std::vector<double>& weights, std::size_t at,
                     std::size_t target, std::vector<std::size_t>& path, std::vector<bool>& on_path,
                     std::optional<double>& best) {
  if (at == target) {
    const double w = path_weight(graph, weights, path);
    if (!best || w < *best) best = w;
    return;
  }
  const auto [lo, hi] = graph.out_edge_range(at);
  for (auto k = lo; k < hi; ++k) {
    const auto next = graph.edges()[k].to;
    if (on_path[next]) continue;
    on_path[next] = true;
    path.push_back(next);
    enumerate_paths(graph, weights, next, target, path, on_path, best);
    path.pop_back();
    on_path[next] = false;
  }
}

}  // namespace

std::vector<double> exhaustive_horizon_values(const graph::MemoryGraph& graph, double discount, std::size_t depth) {
  std::vector<double> out(graph.vertex_count());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = walk_value(graph, discount, v, depth);
  return out;
}

double path_weight(const graph::MemoryGraph& graph, const std::vector<double>& weights,
                   const std::vector<std::size_t>& path) {
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto k = graph.find_edge(path[i], path[i + 1]);
    if (!k) throw std::logic_error("path uses a missing edge");
    w += weights[*k];
  }
  return w;
}

std::optional<double> min_path_weight(const graph::MemoryGraph& graph, const std::vector<double>& weights,
                                      std::size_t source, std::size_t target) {
  std::vector<std::size_t> path{source};
  std::vector<bool> on_path(graph.vertex_count(), false);
  on_path[source] = true;
  std::optional<double> best;
  enumerate_paths(graph, weights, source, target, path, on_path, best);
  return best;
}

std::size_t best_within(const graph::MemoryGraph& graph, const std::vector<double>& values, std::size_t current,
                        std::optional<std::size_t> horizon) {
  const auto n = graph.vertex_count();
  std::vector<std::size_t> hops(n, std::numeric_limits<std::size_t>::max());
  hops[current] = 0;
  // Relax levels until nothing changes (Bellman-Ford on unit weights).
  for (std::size_t level = 0; level < n; ++level) {
    for (const auto& e : graph.edges()) {
      if (hops[e.from] != std::numeric_limits<std::size_t>::max() && hops[e.from] + 1 < hops[e.to]) {
        hops[e.to] = hops[e.from] + 1;
      }
    }
  }
  std::size_t best = current;
  for (std::size_t v = 0; v < n; ++v) {
    if (hops[v] == std::numeric_limits<std::size_t>::max()) continue;
    if (horizon && hops[v] > *horizon) continue;
    const bool better = values[v] > values[best] ||
                        (values[v] == values[best] && (hops[v] < hops[best] || (hops[v] == hops[best] && v < best)));
    if (better) best = v;
  }
  return best;
}

}  // namespace vmg::oracle

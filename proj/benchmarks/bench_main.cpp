#include <algorithm>
#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vmg/adam.hpp"
#include "vmg/agent.hpp"
#include "vmg/envs.hpp"
#include "vmg/graph.hpp"
#include "vmg/metric.hpp"
#include "vmg/planner.hpp"
#include "vmg/tape.hpp"
#include "vmg/translator.hpp"

using namespace vmg;

namespace {

graph::MemoryGraph random_graph(std::size_t n, int out_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<graph::Edge> edges;
  for (std::size_t v = 0; v < n; ++v) {
    edges.push_back({v, (v + 1) % n});  // ring keeps every vertex reachable
    for (int k = 0; k < out_degree; ++k) edges.push_back({v, (v + 1 + rng() % (n - 1)) % n});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<double> rewards(edges.size());
  for (auto& r : rewards) r = u(rng);
  return graph::MemoryGraph::from_edges(n, std::move(edges), std::move(rewards));
}

const data::Dataset& maze_dataset() {
  static const data::Dataset d = [] {
    env::PointMazeEnv e(env::builtin_layout("umaze"));
    env::MazeCollectConfig c;
    c.episodes = 2000;
    c.max_transitions = 20000;
    c.max_episode_steps = 60;
    c.follower.action_noise = 0.5;
    c.follower.wander_prob = 0.05;
    return env::collect_maze_dataset(e, c).dataset;
  }();
  return d;
}

void BM_ValueIteration(benchmark::State& state) {
  const auto g = random_graph(static_cast<std::size_t>(state.range(0)), 4, 1);
  for (auto _ : state) benchmark::DoNotOptimize(plan::value_iteration(g, 0.8));
  state.counters["edges"] = static_cast<double>(g.edge_count());
}
BENCHMARK(BM_ValueIteration)->Arg(1000)->Arg(25000)->Unit(benchmark::kMillisecond);

void BM_ShortestPath(benchmark::State& state) {
  const auto g = random_graph(static_cast<std::size_t>(state.range(0)), 4, 2);
  const auto w = plan::compute_edge_weights(g);
  std::size_t t = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(plan::shortest_path(g, w, 0, t));
    t = 1 + t % (g.vertex_count() - 1);
  }
}
BENCHMARK(BM_ShortestPath)->Arg(1000)->Arg(25000)->Unit(benchmark::kMicrosecond);

void BM_MetricTrainStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  auto model = metric::MetricModel::create(2, 2, 10, 1.0, rng);
  auto s_enc = nn::AdamState::init(model.state_encoder);
  auto a_enc = nn::AdamState::init(model.action_encoder);
  auto a_dec = nn::AdamState::init(model.action_decoder);
  const auto& d = maze_dataset();
  for (auto _ : state) {
    const auto batch = metric::TransitionBatch::from(data::sample_transition_batch(d, 100, rng));
    auto grads = metric::MetricGrads::zeros_like(model);
    nn::Tape tape;
    const auto loss = metric::record_metric_loss(tape, model, &grads, batch);
    tape.backward(loss.total);
    nn::adam_step(model.state_encoder, grads.state_encoder, s_enc);
    nn::adam_step(model.action_encoder, grads.action_encoder, a_enc);
    nn::adam_step(model.action_decoder, grads.action_decoder, a_dec);
  }
}
BENCHMARK(BM_MetricTrainStep)->Unit(benchmark::kMillisecond);

void BM_BuildGraph(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto model = metric::MetricModel::create(2, 2, 10, 1.0, rng);
  const auto& d = maze_dataset();
  const auto features = graph::encode_dataset_states(model, d);
  for (auto _ : state) {
    const auto vs = graph::build_vertices_from_features(features, d, 0.1);
    const auto edges = graph::build_edges(d, vs.assignment);
    benchmark::DoNotOptimize(graph::compute_rewards(d, vs.assignment, edges, graph::GraphRewardMode::avg_with_internal));
  }
  state.counters["transitions"] = static_cast<double>(d.transition_count());
}
BENCHMARK(BM_BuildGraph)->Unit(benchmark::kMillisecond);

void BM_Act(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto& d = maze_dataset();
  auto m = std::make_shared<const metric::MetricModel>(metric::MetricModel::create(2, 2, 10, 1.0, rng));
  auto g = std::make_shared<const graph::MemoryGraph>(graph::build_graph(*m, d, 0.1));
  auto t = std::make_shared<const translator::TranslatorModel>(translator::TranslatorModel::create(2, 2, 10, rng));
  const agent::Agent a(m, g, t, {},
                       {{-1.0, 1.0}, {-1.0, 1.0}});
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(a.act(d.transition(i).state));
    i = (i + 97) % d.transition_count();
  }
  state.counters["vertices"] = static_cast<double>(g->vertex_count());
}
BENCHMARK(BM_Act)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();

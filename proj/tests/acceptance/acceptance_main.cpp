// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "vmg/agent.hpp"
#include "vmg/config.hpp"
#include "vmg/envs.hpp"
#include "vmg/errors.hpp"
#include "vmg/graph.hpp"
#include "vmg/pipeline.hpp"
#include "vmg/planner.hpp"

using namespace vmg;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr std::uint64_t kGradSeeds = 10;
constexpr std::size_t kInvariantTransitions = 10'000;
constexpr double kInvariantSeconds = 60.0;
constexpr double kValueTol = 1e-9;
constexpr std::size_t kLargeVertices = 25'000;
constexpr double kLargeSeconds = 1.0;
constexpr int kDijkstraGraphs = 200;
constexpr double kSuccessMin = 0.80;
constexpr double kPipelineSeconds = 600.0;
constexpr std::size_t kEvalEpisodes = 100;
constexpr std::uint64_t kEvalSeedBase = 1000;
constexpr double kRelabelSuccessMin = 0.60;
constexpr double kOriginalOnNewGoalMax = 0.10;
constexpr double kReplanSeconds = 1.0;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------- 1

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst[4] = {0, 0, 0, 0};
  std::size_t kinks = 0;
  for (std::uint64_t seed = 0; seed < kGradSeeds; ++seed) {
    const oracle::GradCheck r[4] = {oracle::contrastive_gradient_check(seed), oracle::action_gradient_check(seed),
                                    oracle::metric_gradient_check(seed), oracle::translator_gradient_check(seed)};
    for (int k = 0; k < 4; ++k) {
      worst[k] = std::max(worst[k], r[k].max_rel_error);
      kinks += r[k].kinks;
    }
  }
  const double secs = since(t0);
  const double max_err = *std::max_element(std::begin(worst), std::end(worst));
  return {max_err < kGradTol && secs < kGradSeconds,
          "max rel err L_c " + fmt(worst[0]) + ", L_a " + fmt(worst[1]) + ", L_metric " + fmt(worst[2]) +
              ", L_tran " + fmt(worst[3]) + " over " + std::to_string(kGradSeeds) + " seeds (" +
              std::to_string(kinks) + " kink re-checks), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------- 2

Outcome graph_invariants() {
  env::PointMazeEnv e(env::builtin_layout("medium"));
  env::MazeCollectConfig c;
  c.episodes = 2000;
  c.max_transitions = kInvariantTransitions;
  c.seed = 17;
  c.follower.action_noise = 0.5;
  const auto d = env::collect_maze_dataset(e, c).dataset;
  metric::MetricConfig mc;
  mc.epochs = 3;
  mc.seed = 17;
  const auto model = metric::train_metric(d, mc).model;

  std::vector<std::string> violations;
  std::size_t vertices = 0;
  double check_secs = 0.0;
  for (const double gm : {0.4, 0.8}) {
    const auto g = graph::build_graph(model, d, gm);
    vertices = std::max(vertices, g.vertex_count());
    const auto t0 = Clock::now();
    const auto features = graph::encode_dataset_states(model, d);
    for (auto& v : oracle::graph_violations(g, features, d)) violations.push_back(std::move(v));
    for (auto& v : graph::check_invariants(g, model, d)) violations.push_back(std::move(v));
    check_secs += since(t0);
  }
  std::string detail = std::to_string(d.transition_count()) + " transitions, up to " + std::to_string(vertices) +
                       " vertices, " + std::to_string(violations.size()) + " violations, check " + fmt(check_secs) +
                       " s";
  if (!violations.empty()) detail += "; first: " + violations.front();
  return {violations.empty() && d.transition_count() == kInvariantTransitions && check_secs < kInvariantSeconds,
          detail};
}

// ---------------------------------------------------------------------- 3

Outcome value_iteration() {
  double worst = 0.0;
  // Chain 0 -> 1 -> ... -> n-1 with reward 1 on the last edge: V(i) = g^(n-2-i).
  const std::size_t n = 6;
  std::vector<graph::Edge> edges;
  std::vector<double> rewards;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    edges.push_back({i, i + 1});
    rewards.push_back(i + 2 == n ? 1.0 : 0.0);
  }
  const auto chain = graph::MemoryGraph::from_edges(n, edges, rewards);
  const auto vc = plan::value_iteration(chain, 0.9, 1e-13);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    worst = std::max(worst, std::abs(vc.values[i] - std::pow(0.9, static_cast<double>(n - 2 - i))));
  }
  worst = std::max(worst, std::abs(vc.values[n - 1]));
  // Two-cycle with rewards a, b: V0 = (a + g b) / (1 - g^2).
  const double a = 1.0, b = -0.5, gc = 0.8;
  const auto cycle = graph::MemoryGraph::from_edges(2, {{0, 1}, {1, 0}}, {a, b});
  const auto vy = plan::value_iteration(cycle, gc, 1e-13, 100'000);
  worst = std::max(worst, std::abs(vy.values[0] - (a + gc * b) / (1 - gc * gc)));
  worst = std::max(worst, std::abs(vy.values[1] - (b + gc * a) / (1 - gc * gc)));

  // Random graphs: policy enumeration and exhaustive k-step backups.
  std::mt19937_64 rng(3);
  int compared = 0;
  for (int trial = 0; trial < 400 && compared < 100; ++trial) {
    oracle::RandomGraphSpec spec;
    spec.vertices = 2 + rng() % 11;
    spec.edge_probability = 0.2;
    const auto g = oracle::random_graph(spec, rng);
    const double discount = 0.5 + 0.45 * static_cast<double>(rng() % 100) / 100.0;
    const auto want = oracle::policy_enumeration_values(g, discount);
    if (!want) continue;
    worst = std::max(worst, max_abs_diff(plan::value_iteration(g, discount, 1e-13, 100'000).values, *want));
    ++compared;
  }
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_graph({4 + rng() % 5, 0.35, -1.0, 1.0, std::nullopt}, rng);
    for (std::size_t k = 1; k <= 5; ++k) {
      worst = std::max(worst, max_abs_diff(plan::value_iteration(g, 0.8, 0.0, k).values,
                                           oracle::exhaustive_horizon_values(g, 0.8, k)));
    }
  }

  // Large random graph, default tolerance.
  std::vector<graph::Edge> big;
  std::vector<double> big_r;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t v = 0; v < kLargeVertices; ++v) {
    for (int k = 0; k < 4; ++k) big.push_back({v, (v + 1 + rng() % (kLargeVertices - 1)) % kLargeVertices});
  }
  std::sort(big.begin(), big.end());
  big.erase(std::unique(big.begin(), big.end()), big.end());
  for (std::size_t i = 0; i < big.size(); ++i) big_r.push_back(u(rng));
  const auto large = graph::MemoryGraph::from_edges(kLargeVertices, big, big_r);
  const auto t0 = Clock::now();
  const auto vl = plan::value_iteration(large, 0.8);
  const double secs = since(t0);

  return {worst <= kValueTol && compared == 100 && vl.converged && secs < kLargeSeconds,
          "max |V - oracle| " + fmt(worst) + " (chain, cycle, " + std::to_string(compared) +
              " enumerated graphs, 150 k-step sweeps); 25k vertices / " + std::to_string(big.size()) +
              " edges converged in " + std::to_string(vl.iterations_run) + " sweeps, " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------- 4

Outcome dijkstra() {
  std::mt19937_64 rng(4);
  int graphs = 0, queries = 0, mismatches = 0, bad_weights = 0;
  while (graphs < kDijkstraGraphs) {
    oracle::RandomGraphSpec spec;
    spec.vertices = 2 + rng() % 9;
    spec.edge_probability = 0.35;
    spec.dyadic_bits = 4;
    const auto g = oracle::random_graph(spec, rng);
    if (g.edge_count() == 0) continue;
    ++graphs;
    const auto w = plan::compute_edge_weights(g);
    if (*std::min_element(w.begin(), w.end()) != 0.0 || std::any_of(w.begin(), w.end(), [](double x) { return x < 0; })) {
      ++bad_weights;
    }
    for (std::size_t s = 0; s < g.vertex_count(); ++s) {
      for (std::size_t t = 0; t < g.vertex_count(); ++t) {
        const auto want = oracle::min_path_weight(g, w, s, t);
        if (!want) {
          try {
            plan::shortest_path(g, w, s, t);
            ++mismatches;
          } catch (const PlanningError&) {
          }
          continue;
        }
        const auto path = plan::shortest_path(g, w, s, t);
        if (path.front() != s || path.back() != t || oracle::path_weight(g, w, path) != *want) ++mismatches;
        ++queries;
      }
    }
  }
  return {mismatches == 0 && bad_weights == 0,
          std::to_string(graphs) + " graphs, " + std::to_string(queries) + " reachable queries, " +
              std::to_string(mismatches) + " mismatches, " + std::to_string(bad_weights) + " bad weight sets"};
}

// ---------------------------------------------------------------------- 5

Outcome reward_modes() {
  using data::Dataset;
  using nn::Vector;
  auto v1 = [](double x) { return Vector::Constant(1, x); };
  int failures = 0;

  // Worked example: internal {0.2}, crossing {1.0, 0.6}, internal {0.4} -> 0.1 + 0.8 + 0.2.
  const auto d = oracle::dataset_from_chains({{v1(0), v1(0.1), v1(1), v1(1.1)}, {v1(0.2), v1(1.2)}},
                                             {{0.2, 1.0, 0.4}, {0.6}});
  const graph::StateAssignment a{{{0, 0, 1, 1}, {0, 1}}};
  const auto e = graph::build_edges(d, a);
  const double worked = graph::compute_rewards(d, a, e, graph::GraphRewardMode::avg_with_internal).rewards.at(0);
  if (std::abs(worked - 1.1) > 1e-12) ++failures;

  // Random assignments with quarter-integer rewards: every aggregate is exact.
  std::mt19937_64 rng(5);
  int edges_checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t vertices = 1 + rng() % 4;
    std::vector<std::vector<Vector>> chains;
    std::vector<std::vector<double>> rewards;
    graph::StateAssignment assign;
    const std::size_t episodes = 1 + rng() % 4;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
      const std::size_t len = 2 + rng() % 6;
      std::vector<Vector> chain;
      std::vector<std::size_t> ids;
      std::vector<double> rs;
      for (std::size_t t = 0; t < len; ++t) {
        chain.push_back(v1(static_cast<double>(chains.size() * 100 + t)));
        ids.push_back(rng() % vertices);
        if (t + 1 < len) rs.push_back(static_cast<double>(static_cast<int>(rng() % 17) - 8) / 4.0);
      }
      chains.push_back(std::move(chain));
      rewards.push_back(std::move(rs));
      assign.per_episode.push_back(std::move(ids));
    }
    const auto ds = oracle::dataset_from_chains(chains, rewards);
    const auto edges = graph::build_edges(ds, assign);
    for (const auto mode : graph::kAllRewardModes) {
      if (graph::compute_rewards(ds, assign, edges, mode).rewards != oracle::graph_rewards(ds, assign, edges, mode)) {
        ++failures;
      }
    }
    edges_checked += static_cast<int>(edges.size());
  }
  return {failures == 0, "worked example " + fmt(worked, 17) + "; 300 random assignments x 6 modes, " +
                             std::to_string(edges_checked) + " edges, " + std::to_string(failures) + " mismatches"};
}

// ------------------------------------------------------------------ 6 to 9

config::PipelineConfig maze_config(const std::string& env_name, std::size_t model_seeds) {
  auto c = config::parse_config_text(R"({
    "metric": {"epochs": 40, "checkpoint_every": 10},
    "translator": {"epochs": 150, "checkpoint_every": 25}
  })");
  c.env.name = env_name;
  c.eval.episodes = kEvalEpisodes;
  c.eval.model_seeds = model_seeds;
  c.eval.seed_base = kEvalSeedBase;
  return c;
}

std::vector<agent::Agent> agents_of(const std::string& run_dir, const env::Env& e) {
  return agent::load_agents((fs::path(run_dir) / pipeline::paths::kBundle).string(), e.spec().action_bounds);
}

// The collector's own policy, driven to the task goal.
agent::PolicyFactory behavior_policy(const env::PointMazeEnv& e, env::WaypointFollowerConfig cfg) {
  auto layout = std::make_shared<const env::MazeLayout>(e.layout());
  const env::Cell goal = e.goal_cell();
  const nn::Vector target = e.goal_center();
  return [layout, goal, target, cfg](std::uint64_t seed) {
    auto f = std::make_shared<env::WaypointFollower>(*layout, goal, target, cfg, seed);
    return [layout, f](const nn::Vector& s) { return f->act(s); };
  };
}

struct Shared {
  std::string umaze_run;
  bool umaze_ok = false;
};

Outcome end_to_end(const fs::path& work, Shared& shared) {
  const auto cfg = maze_config("pointmaze-umaze", 3);
  shared.umaze_run = (work / "umaze").string();
  fs::remove_all(shared.umaze_run);
  const auto t0 = Clock::now();
  pipeline::run_pipeline(cfg, shared.umaze_run, {&std::cerr});
  const double secs = since(t0);
  shared.umaze_ok = true;

  std::ifstream in(fs::path(shared.umaze_run) / pipeline::paths::kReport);
  const auto report = ordered_json::parse(in);
  const auto e = config::make_env(cfg.env);
  const auto& maze = dynamic_cast<const env::PointMazeEnv&>(*e);
  env::WaypointFollowerConfig fc;
  fc.action_noise = cfg.collect.action_noise;
  fc.wander_prob = cfg.collect.wander_prob;
  fc.wander_steps = cfg.collect.wander_steps;
  const agent::PolicyFactory baselines[] = {behavior_policy(maze, fc), agent::random_policy(e->spec())};
  const auto behavior = agent::evaluate_policies(std::span(&baselines[0], 1), *e, kEvalEpisodes, kEvalSeedBase);
  const auto random = agent::evaluate_policies(std::span(&baselines[1], 1), *e, kEvalEpisodes, kEvalSeedBase);
  const double vmg = report.at("success_mean").get<double>();
  const double beh = behavior.success_mean;

  std::string per_seed;
  for (const auto& m : report.at("models")) per_seed += (per_seed.empty() ? "" : "/") + fmt(m.at("success_rate").get<double>());
  return {vmg >= kSuccessMin && vmg > beh && secs < kPipelineSeconds,
          "success " + fmt(vmg) + " +- " + fmt(report.at("success_std").get<double>()) + " (seeds " + per_seed + "), normalized " +
              fmt(report.at("normalized_mean").get<double>()) + " +- " +
              fmt(report.at("normalized_std").get<double>()) + "; behavior " + fmt(beh) +
              ", random " + fmt(random.success_mean) + "; pipeline " + fmt(secs, 4) + " s"};
}

Outcome reusability(const Shared& shared) {
  if (!shared.umaze_ok) return {false, "no trained umaze run"};
  const auto data = data::load((fs::path(shared.umaze_run) / pipeline::paths::kDataset).string());
  env::MazeTask reversed;
  reversed.start = env::Cell{1, 1};
  reversed.goal = env::Cell{1, 3};
  const env::PointMazeEnv e(env::builtin_layout("umaze"), reversed);
  const auto original = agents_of(shared.umaze_run, e);

  double worst_replan = 0.0;
  std::vector<agent::Agent> replanned;
  for (const auto& a : original) {
    const auto t0 = Clock::now();
    replanned.push_back(agent::relabel_and_replan(a, data, env::goal_entry_reward(e.goal_center(), e.goal_radius())));
    worst_replan = std::max(worst_replan, since(t0));
  }
  const auto before = agent::evaluate(original, e, kEvalEpisodes, kEvalSeedBase);
  const auto after = agent::evaluate(replanned, e, kEvalEpisodes, kEvalSeedBase);
  return {after.success_mean >= kRelabelSuccessMin && before.success_mean < kOriginalOnNewGoalMax &&
              worst_replan < kReplanSeconds,
          "new goal: relabeled " + fmt(after.success_mean) + " +- " + fmt(after.success_std) + " vs original " +
              fmt(before.success_mean) + "; slowest replan " + fmt(worst_replan) + " s"};
}

Outcome ablations(const fs::path& work, const Shared& shared) {
  if (!shared.umaze_ok) return {false, "no trained umaze run"};
  // Vertex counts over the merge-threshold sweep, per trained metric model.
  const auto cfg = maze_config("pointmaze-umaze", 3);
  const auto data = data::load((fs::path(shared.umaze_run) / pipeline::paths::kDataset).string());
  const double base = cfg.graph.gamma_m;
  bool decreasing = true;
  std::string counts;
  for (std::size_t i = 0; i < cfg.eval.model_seeds; ++i) {
    const auto m = metric::load_model((fs::path(shared.umaze_run) / pipeline::paths::metric(cfg.model_seed(i))).string());
    std::vector<std::size_t> v;
    for (const double f : {0.5, 1.0, 2.0}) v.push_back(graph::build_graph(m, data, f * base).vertex_count());
    decreasing = decreasing && v[0] > v[1] && v[1] > v[2];
    counts += (counts.empty() ? "" : "; ") + std::to_string(v[0]) + ">" + std::to_string(v[1]) + ">" +
              std::to_string(v[2]);
  }

  // Greedy one-step vs multi-step search on the medium maze, same models, same episode seeds.
  const auto mcfg = maze_config("pointmaze-medium", 1);
  const std::string mdir = (work / "medium").string();
  fs::remove_all(mdir);
  pipeline::run_pipeline(mcfg, mdir, {&std::cerr});
  const auto e = config::make_env(mcfg.env);
  const auto search = agents_of(mdir, *e);
  std::vector<agent::Agent> greedy;
  for (const auto& a : search) {
    auto pc = a.config();
    pc.greedy = true;
    greedy.push_back(a.with_config(pc));
  }
  const auto rs = agent::evaluate(search, *e, kEvalEpisodes, kEvalSeedBase);
  const auto rg = agent::evaluate(greedy, *e, kEvalEpisodes, kEvalSeedBase);
  return {decreasing && rg.success_mean <= rs.success_mean,
          "vertices at gamma_m x{0.5,1,2}: " + counts + "; medium success greedy " + fmt(rg.success_mean) +
              " vs search " + fmt(rs.success_mean)};
}

Outcome reproducibility(const fs::path& work) {
  auto cfg = config::parse_config_text(R"({
    "seed": 7,
    "collect": {"episodes": 60, "max_transitions": 1200},
    "metric": {"epochs": 3, "checkpoint_every": 1},
    "translator": {"epochs": 3, "checkpoint_every": 1},
    "eval": {"episodes": 5, "model_seeds": 2, "checkpoint": "eval", "select_from_epoch": 2, "selection_episodes": 3}
  })");
  const auto src = (work / "replay_src").string();
  const auto dst = (work / "replay_dst").string();
  fs::remove_all(src);
  fs::remove_all(dst);
  const auto m = pipeline::run_pipeline(cfg, src);
  std::size_t artifacts = 0;
  for (const auto& s : m.stages) artifacts += s.outputs.size();
  const auto diffs = pipeline::replay_manifest((fs::path(src) / pipeline::paths::kManifest).string(), dst);
  std::string detail = std::to_string(m.stages.size()) + " stages, " + std::to_string(artifacts) + " artifacts, " +
                       std::to_string(diffs.size()) + " hash differences";
  if (!diffs.empty()) detail += "; first: " + diffs.front();
  return {diffs.empty() && artifacts > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run only these criteria (1-9)");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = fs::absolute(work_dir);
  fs::create_directories(work);

  Shared shared;
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int k) { return selected.empty() || selected.contains(k); };
  // Criteria 7 and 8 reuse the models trained for 6.
  if (wanted(7) || wanted(8)) {
    if (!selected.empty()) {
      std::set<int> s = selected;
      s.insert(6);
      only.assign(s.begin(), s.end());
    }
  }
  const std::set<int> run(only.begin(), only.end());
  auto runs = [&](int k) { return run.empty() || run.contains(k); };

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradients},
      {2, graph_invariants},
      {3, value_iteration},
      {4, dijkstra},
      {5, reward_modes},
      {6, [&] { return end_to_end(work, shared); }},
      {7, [&] { return reusability(shared); }},
      {8, [&] { return ablations(work, shared); }},
      {9, [&] { return reproducibility(work); }},
  };

  ordered_json summary = ordered_json::array();
  int failed = 0;
  for (const auto& [k, fn] : criteria) {
    if (!runs(k)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = since(t0);
    if (!wanted(k)) continue;
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << "\n" << std::flush;
    summary.push_back({{"criterion", k}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", secs}});
  }
  std::ofstream(work / "acceptance.json") << summary.dump(2) << "\n";
  return failed == 0 ? 0 : 1;
}

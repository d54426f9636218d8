#include "vmg/agent.hpp"

#include <json.hpp>

#include <cmath>
#include <exception>
#include <filesystem>
#include <numeric>
#include <random>

#include "vmg/binary_io.hpp"
#include "vmg/errors.hpp"

namespace vmg::agent {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

Vector clip(const ActionBounds& bounds, Vector a) {
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    a[idx] = std::clamp(a[idx], bounds[i].first, bounds[i].second);
  }
  return a;
}

std::string read_text(const std::string& path) {
  const auto bytes = io::read_file(path);
  return {bytes.begin(), bytes.end()};
}

ordered_json plan_to_json(const plan::PlanConfig& c) {
  ordered_json j;
  j["discount"] = c.discount;
  j["search_horizon"] = c.search_horizon ? ordered_json(*c.search_horizon) : ordered_json(nullptr);
  j["subgoal_index"] = c.subgoal_index;
  j["greedy"] = c.greedy;
  return j;
}

plan::PlanConfig plan_from_json(const nlohmann::json& j) {
  plan::PlanConfig c;
  c.discount = j.at("discount").get<double>();
  if (!j.at("search_horizon").is_null()) c.search_horizon = j.at("search_horizon").get<std::size_t>();
  c.subgoal_index = j.at("subgoal_index").get<std::size_t>();
  c.greedy = j.at("greedy").get<bool>();
  return c;
}

}  // namespace

// ---------------------------------------------------------------- Agent

Agent::Agent(std::shared_ptr<const metric::MetricModel> metric, std::shared_ptr<const graph::MemoryGraph> graph,
             std::shared_ptr<const translator::TranslatorModel> translator, plan::PlanConfig config,
             ActionBounds bounds, std::optional<plan::ValueTable> values)
    : metric_(std::move(metric)),
      graph_(std::move(graph)),
      translator_(std::move(translator)),
      config_(config),
      bounds_(std::move(bounds)) {
  if (!metric_ || !graph_ || !translator_) throw InvalidArgument("agent components must not be null");
  if (graph_->vertex_count() == 0) throw InvalidArgument("agent graph has no vertices");
  const auto& hash = graph_->metadata().model_hash;
  if (!hash.empty() && hash != metric::model_hash(*metric_)) {
    throw InvalidArgument("graph was built with a different metric model");
  }
  const std::size_t sd = metric_->state_dim();
  if (translator_->state_dim() != sd) throw InvalidArgument("translator state dimension differs from metric model");
  if (static_cast<std::size_t>(graph_->vertices().front().representative_state.size()) != sd) {
    throw InvalidArgument("graph state dimension differs from metric model");
  }
  if (bounds_.size() != translator_->action_dim()) throw InvalidArgument("action bounds do not match translator");
  if (values) {
    if (values->values.size() != graph_->vertex_count()) throw InvalidArgument("value table size mismatch");
    if (values->discount != config_.discount) throw InvalidArgument("value table discount differs from plan config");
    values_ = std::move(*values);
  } else {
    values_ = plan::value_iteration(*graph_, config_.discount);
  }
  weights_ = plan::compute_edge_weights(*graph_);
}

Decision Agent::decide(const Vector& state) const {
  if (static_cast<std::size_t>(state.size()) != metric_->state_dim()) {
    throw InvalidArgument("state has dimension " + std::to_string(state.size()) + ", expected " +
                          std::to_string(metric_->state_dim()));
  }
  Decision d;
  const Vector f = metric::encode_state(*metric_, state);
  d.current_vertex = graph::classify(f, graph_->vertices());
  d.target_vertex = plan::select_graph_action(*graph_, values_.values, weights_, d.current_vertex, config_);
  const Vector& goal = graph_->vertices()[d.target_vertex].representative_state;
  d.action = clip(bounds_, translator::translate(*translator_, state, goal));
  return d;
}

Vector Agent::act(const Vector& state) const { return decide(state).action; }

Agent Agent::with_config(plan::PlanConfig config) const {
  std::optional<plan::ValueTable> reuse;
  if (config.discount == config_.discount) reuse = values_;
  return Agent(metric_, graph_, translator_, config, bounds_, std::move(reuse));
}

Agent relabel_and_replan(const Agent& agent, const data::Dataset& dataset, const data::RewardFn& reward_fn) {
  const graph::MemoryGraph& g = agent.graph();
  if (!g.metadata().dataset_hash.empty() && g.metadata().dataset_hash != graph::dataset_structure_hash(dataset)) {
    throw InvalidArgument("dataset differs from the one the graph was built from");
  }
  const data::Dataset relabeled = data::relabel_rewards(dataset, reward_fn);
  auto graph = std::make_shared<const graph::MemoryGraph>(
      graph::recompute_rewards(g, relabeled, g.metadata().reward_mode));
  return Agent(agent.metric_ptr(), std::move(graph), agent.translator_ptr(), agent.config(), agent.bounds());
}

// ---------------------------------------------------------------- evaluation

double normalized_score(double score, double random_score, double expert_score) {
  if (expert_score == random_score) throw InvalidArgument("expert and random scores coincide");
  return 100.0 * (score - random_score) / (expert_score - random_score);
}

EpisodeResult run_episode(const Policy& policy, env::Env& env, std::uint64_t seed) {
  EpisodeResult r;
  r.seed = seed;
  Vector s = env.reset(seed);
  while (true) {
    const env::StepResult res = env.step(policy(s));
    r.episode_return += res.reward;
    r.success = r.success || res.success;
    ++r.length;
    s = res.state;
    if (res.terminal) break;
  }
  return r;
}

EvalReport evaluate_policies(std::span<const PolicyFactory> models, const env::Env& env, std::size_t n_episodes,
                             std::uint64_t seed_base) {
  if (n_episodes == 0) throw InvalidArgument("n_episodes must be >= 1");
  if (models.empty()) throw InvalidArgument("evaluate needs at least one model");
  const env::EnvSpec& spec = env.spec();
  EvalReport report;
  report.env_name = spec.name;
  report.episodes_per_model = n_episodes;
  report.seed_base = seed_base;
  report.random_score = spec.random_score;
  report.expert_score = spec.expert_score;

  std::vector<double> successes, returns, normalized;
  for (const PolicyFactory& factory : models) {
    ModelResult m;
    for (std::size_t i = 0; i < n_episodes; ++i) {
      const std::uint64_t seed = seed_base + i;
      auto instance = env.clone();
      std::size_t step = 0;
      const Policy inner = factory(seed);
      const Policy policy = [&](const Vector& s) {
        try {
          return inner(s);
        } catch (const std::exception& e) {
          std::throw_with_nested(ExecutionError(e.what(), i, step));
        }
      };
      EpisodeResult r;
      r.seed = seed;
      Vector s = instance->reset(seed);
      while (true) {
        const env::StepResult res = instance->step(policy(s));
        r.episode_return += res.reward;
        r.success = r.success || res.success;
        ++r.length;
        ++step;
        s = res.state;
        if (res.terminal) break;
      }
      m.episodes.push_back(r);
    }
    std::vector<double> rets, lens;
    std::size_t ok = 0;
    for (const auto& e : m.episodes) {
      rets.push_back(e.episode_return);
      lens.push_back(static_cast<double>(e.length));
      ok += e.success ? 1 : 0;
    }
    m.success_rate = static_cast<double>(ok) / static_cast<double>(n_episodes);
    m.mean_return = mean_of(rets);
    m.return_std = sample_std(rets);
    m.mean_length = mean_of(lens);
    m.normalized_score = normalized_score(m.mean_return, spec.random_score, spec.expert_score);
    successes.push_back(m.success_rate);
    returns.push_back(m.mean_return);
    normalized.push_back(m.normalized_score);
    report.models.push_back(std::move(m));
  }
  report.success_mean = mean_of(successes);
  report.success_std = sample_std(successes);
  report.return_mean = mean_of(returns);
  report.return_std = sample_std(returns);
  report.normalized_mean = mean_of(normalized);
  report.normalized_std = sample_std(normalized);
  return report;
}

EvalReport evaluate(std::span<const Agent> agents, const env::Env& env, std::size_t n_episodes,
                    std::uint64_t seed_base) {
  std::vector<PolicyFactory> factories;
  for (const Agent& a : agents) {
    factories.push_back([&a](std::uint64_t) { return Policy([&a](const Vector& s) { return a.act(s); }); });
  }
  return evaluate_policies(factories, env, n_episodes, seed_base);
}

PolicyFactory random_policy(const env::EnvSpec& spec) {
  const auto bounds = spec.action_bounds;
  return [bounds](std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed ^ 0x9e3779b97f4a7c15ULL);
    return Policy([bounds, rng](const Vector&) {
      Vector a(static_cast<Eigen::Index>(bounds.size()));
      for (std::size_t i = 0; i < bounds.size(); ++i) {
        a[static_cast<Eigen::Index>(i)] = std::uniform_real_distribution<double>(bounds[i].first, bounds[i].second)(*rng);
      }
      return a;
    });
  };
}

std::string encode_report(const EvalReport& r) {
  ordered_json j;
  j["format"] = "vmg-eval-report";
  j["env"] = r.env_name;
  j["episodes_per_model"] = r.episodes_per_model;
  j["seed_base"] = r.seed_base;
  j["random_score"] = r.random_score;
  j["expert_score"] = r.expert_score;
  j["success_mean"] = r.success_mean;
  j["success_std"] = r.success_std;
  j["return_mean"] = r.return_mean;
  j["return_std"] = r.return_std;
  j["normalized_mean"] = r.normalized_mean;
  j["normalized_std"] = r.normalized_std;
  ordered_json models = ordered_json::array();
  for (const auto& m : r.models) {
    ordered_json mj;
    mj["success_rate"] = m.success_rate;
    mj["mean_return"] = m.mean_return;
    mj["return_std"] = m.return_std;
    mj["mean_length"] = m.mean_length;
    mj["normalized_score"] = m.normalized_score;
    ordered_json eps = ordered_json::array();
    for (const auto& e : m.episodes) {
      eps.push_back({{"seed", e.seed}, {"return", e.episode_return}, {"success", e.success}, {"length", e.length}});
    }
    mj["episodes"] = std::move(eps);
    models.push_back(std::move(mj));
  }
  j["models"] = std::move(models);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- persistence

void save_values(const plan::ValueTable& v, const std::string& path) {
  ordered_json j;
  j["format"] = "vmg-values";
  j["version"] = 1;
  j["discount"] = v.discount;
  j["iterations"] = v.iterations_run;
  j["converged"] = v.converged;
  j["last_change"] = v.last_change;
  j["values"] = v.values;
  io::write_text_file(path, j.dump() + "\n");
}

plan::ValueTable load_values(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("values: ") + e.what(), 1);
  }
  try {
    if (j.at("format").get<std::string>() != "vmg-values") throw SchemaError("not a vmg-values document");
    plan::ValueTable v;
    v.discount = j.at("discount").get<double>();
    v.iterations_run = j.at("iterations").get<std::size_t>();
    v.converged = j.at("converged").get<bool>();
    v.last_change = j.at("last_change").get<double>();
    v.values = j.at("values").get<std::vector<double>>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("values: ") + e.what());
  }
}

std::string encode_plan_config(const plan::PlanConfig& config) { return plan_to_json(config).dump(2) + "\n"; }

plan::PlanConfig decode_plan_config(const std::string& text) {
  try {
    return plan_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("plan config: ") + e.what());
  }
}

void save_bundle(const AgentBundle& bundle, const std::string& path) {
  ordered_json j;
  j["format"] = "vmg-agent-bundle";
  j["version"] = 1;
  j["env"] = bundle.env_name;
  j["plan"] = plan_to_json(bundle.plan);
  ordered_json agents = ordered_json::array();
  for (const auto& e : bundle.entries) {
    agents.push_back({{"seed", e.seed},
                      {"metric", e.metric_path},
                      {"translator", e.translator_path},
                      {"graph", e.graph_path},
                      {"values", e.values_path}});
  }
  j["agents"] = std::move(agents);
  io::write_text_file(path, j.dump(2) + "\n");
}

AgentBundle load_bundle(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bundle: ") + e.what(), 1);
  }
  try {
    if (j.at("format").get<std::string>() != "vmg-agent-bundle") throw SchemaError("not a vmg-agent-bundle document");
    AgentBundle b;
    b.env_name = j.at("env").get<std::string>();
    b.plan = plan_from_json(j.at("plan"));
    for (const auto& a : j.at("agents")) {
      b.entries.push_back({a.at("seed").get<std::uint64_t>(), a.at("metric").get<std::string>(),
                           a.at("translator").get<std::string>(), a.at("graph").get<std::string>(),
                           a.value("values", std::string())});
    }
    if (b.entries.empty()) throw SchemaError("bundle lists no agents");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bundle: ") + e.what());
  }
}

std::vector<Agent> load_agents(const std::string& bundle_path, const ActionBounds& bounds) {
  const AgentBundle b = load_bundle(bundle_path);
  const fs::path base = fs::path(bundle_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  std::vector<Agent> out;
  for (const auto& e : b.entries) {
    auto metric = std::make_shared<const metric::MetricModel>(metric::load_model(resolve(e.metric_path)));
    auto tran = std::make_shared<const translator::TranslatorModel>(translator::load_model(resolve(e.translator_path)));
    auto graph = std::make_shared<const graph::MemoryGraph>(graph::load_graph(resolve(e.graph_path)));
    std::optional<plan::ValueTable> values;
    if (!e.values_path.empty()) {
      values = load_values(resolve(e.values_path));
      if (values->discount != b.plan.discount) values.reset();
    }
    out.emplace_back(std::move(metric), std::move(graph), std::move(tran), b.plan, bounds, std::move(values));
  }
  return out;
}

}  // namespace vmg::agent

#include "vmg/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "vmg/errors.hpp"

namespace vmg::config {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"kitchen", 0.5, 0.95, 2, std::nullopt},
      {"antmaze", 0.8, 0.8, 1, std::nullopt},
      {"pen", 0.3, 0.8, 2, 12},
      {"hammer", 1.0, 0.8, 2, 12},
      {"door", 0.3, 0.8, 2, 12},
  };
  return table;
}

const Preset& find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("preset", "preset must be one of kitchen, antmaze, pen, hammer, door");
}

metric::MetricConfig PipelineConfig::metric_config(std::uint64_t model_seed) const {
  metric::MetricConfig c;
  c.metric_dim = metric.metric_dim;
  c.margin = metric.margin;
  c.epochs = metric.epochs;
  c.batch_size = metric.batch_size;
  c.learning_rate = metric.learning_rate;
  c.seed = model_seed;
  c.checkpoint_every = metric.checkpoint_every;
  return c;
}

translator::TranslatorConfig PipelineConfig::translator_config(std::uint64_t model_seed) const {
  translator::TranslatorConfig c;
  c.horizon = translator.horizon;
  c.epochs = translator.epochs;
  c.batch_size = translator.batch_size;
  c.learning_rate = translator.learning_rate;
  c.seed = model_seed;
  c.checkpoint_every = translator.checkpoint_every;
  return c;
}

plan::PlanConfig PipelineConfig::plan_config() const {
  plan::PlanConfig c;
  c.discount = plan.discount;
  c.search_horizon = plan.search_horizon;
  c.subgoal_index = plan.subgoal_index;
  c.greedy = plan.greedy;
  return c;
}

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, where("") + "must be an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : obj_.items()) {
      if (!allowed.contains(k)) throw ConfigError(full(k), "unknown key '" + full(k) + "'");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw json::type_error::create(302, "", &v);
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw json::type_error::create(302, "", &v);
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw json::type_error::create(302, "", &v);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw json::type_error::create(302, "", &v);
      } else {
        if (!v.is_string()) throw json::type_error::create(302, "", &v);
      }
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(full(key), std::string(key) + " has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) const {
    if (!obj_.contains(key)) return;
    if (obj_.at(key).is_null()) {
      out.reset();
      return;
    }
    T tmp{};
    read(key, tmp);
    out = tmp;
  }

 private:
  std::string where(const std::string&) const { return path_.empty() ? "config " : path_ + " "; }
  const json& obj_;
  std::string path_;
};

void read_cell(const Reader& r, const char* key, std::optional<std::array<int, 2>>& out) {
  if (!r.has(key)) return;
  const json& v = r.at(key);
  if (v.is_null()) {
    out.reset();
    return;
  }
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ConfigError(r.full(key), std::string(key) + " must be [col, row]");
  }
  out = std::array<int, 2>{v[0].get<int>(), v[1].get<int>()};
}

void check(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) {
    const auto dot = key.rfind('.');
    throw ConfigError(key, (dot == std::string::npos ? key : key.substr(dot + 1)) + " " + constraint);
  }
}

ordered_json cell_json(const std::optional<std::array<int, 2>>& c) {
  return c ? ordered_json::array({(*c)[0], (*c)[1]}) : ordered_json(nullptr);
}

template <typename T>
ordered_json opt_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

void validate(const PipelineConfig& c) {
  check(c.schema_version == kSchemaVersion, "schema_version", "must be " + std::to_string(kSchemaVersion));
  (void)find_preset(c.preset);
  const std::set<std::string> envs = {"pointmaze-umaze", "pointmaze-medium", "pointmaze", "chain"};
  check(envs.contains(c.env.name), "env.name", "must be one of pointmaze-umaze, pointmaze-medium, pointmaze, chain");
  check(c.env.name != "pointmaze" || c.env.layout.has_value(), "env.layout", "is required for env 'pointmaze'");
  check(c.collect.mode == "diverse" || c.collect.mode == "goal", "collect.mode", "must be diverse or goal");
  check(c.collect.episodes >= 1, "collect.episodes", "must be >= 1");
  check(!c.collect.max_transitions || *c.collect.max_transitions >= 1, "collect.max_transitions", "must be >= 1");
  check(c.collect.max_episode_steps >= 1, "collect.max_episode_steps", "must be >= 1");
  check(c.collect.action_noise >= 0.0, "collect.action_noise", "must be >= 0");
  check(c.collect.wander_prob >= 0.0 && c.collect.wander_prob <= 1.0, "collect.wander_prob", "must be in [0, 1]");
  check(c.metric.metric_dim >= 1, "metric.metric_dim", "must be >= 1");
  check(c.metric.margin > 0.0, "metric.margin", "must be > 0");
  check(c.metric.epochs >= 1, "metric.epochs", "must be >= 1");
  check(c.metric.batch_size >= 2, "metric.batch_size", "must be >= 2");
  check(c.metric.learning_rate > 0.0, "metric.learning_rate", "must be > 0");
  check(c.metric.checkpoint_every >= 1, "metric.checkpoint_every", "must be >= 1");
  check(c.graph.gamma_m > 0.0, "graph.gamma_m", "must be > 0");
  try {
    (void)graph::parse_reward_mode(c.graph.reward_mode);
  } catch (const std::exception&) {
    check(false, "graph.reward_mode", "must be one of avg_with_internal, max, sum, rm, rm_h, rm_t");
  }
  check(c.plan.discount > 0.0 && c.plan.discount < 1.0, "plan.discount", "must be in (0, 1)");
  check(!c.plan.search_horizon || *c.plan.search_horizon >= 1, "plan.search_horizon", "must be >= 1 or null");
  check(c.plan.subgoal_index >= 1, "plan.subgoal_index", "must be >= 1");
  check(c.translator.horizon >= 1, "translator.horizon", "must be >= 1");
  check(c.translator.epochs >= 1, "translator.epochs", "must be >= 1");
  check(c.translator.batch_size >= 1, "translator.batch_size", "must be >= 1");
  check(c.translator.learning_rate > 0.0, "translator.learning_rate", "must be > 0");
  check(c.translator.checkpoint_every >= 1, "translator.checkpoint_every", "must be >= 1");
  check(c.eval.episodes >= 1, "eval.episodes", "must be >= 1");
  check(c.eval.model_seeds >= 1, "eval.model_seeds", "must be >= 1");
  check(c.eval.checkpoint == "last" || c.eval.checkpoint == "eval", "eval.checkpoint", "must be last or eval");
  check(c.eval.selection_episodes >= 1, "eval.selection_episodes", "must be >= 1");
}

PipelineConfig parse_config_text(std::string_view text) {
  json root;
  const bool blank = std::all_of(text.begin(), text.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); });
  if (blank) {
    root = json::object();
  } else {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("config: ") + e.what(), 1);
    }
  }
  Reader r(root, "");
  r.allow({"schema_version", "preset", "seed", "env", "collect", "metric", "graph", "plan", "translator", "eval"});

  PipelineConfig c;
  r.read("schema_version", c.schema_version);
  r.read("preset", c.preset);
  r.read("seed", c.seed);
  const Preset& p = find_preset(c.preset);
  c.graph.gamma_m = p.gamma_m;
  c.plan.discount = p.discount;
  c.plan.subgoal_index = p.subgoal_index;
  c.plan.search_horizon = p.search_horizon;

  if (r.has("env")) {
    Reader s(r.at("env"), "env");
    s.allow({"name", "layout", "start", "goal"});
    s.read("name", c.env.name);
    s.read_optional("layout", c.env.layout);
    read_cell(s, "start", c.env.start);
    read_cell(s, "goal", c.env.goal);
  }
  if (r.has("collect")) {
    Reader s(r.at("collect"), "collect");
    s.allow({"dataset", "mode", "episodes", "max_transitions", "max_episode_steps", "action_noise", "wander_prob",
             "wander_steps"});
    s.read_optional("dataset", c.collect.dataset);
    s.read("mode", c.collect.mode);
    s.read("episodes", c.collect.episodes);
    s.read_optional("max_transitions", c.collect.max_transitions);
    s.read("max_episode_steps", c.collect.max_episode_steps);
    s.read("action_noise", c.collect.action_noise);
    s.read("wander_prob", c.collect.wander_prob);
    s.read("wander_steps", c.collect.wander_steps);
  }
  if (r.has("metric")) {
    Reader s(r.at("metric"), "metric");
    s.allow({"metric_dim", "margin", "epochs", "batch_size", "learning_rate", "checkpoint_every"});
    s.read("metric_dim", c.metric.metric_dim);
    s.read("margin", c.metric.margin);
    s.read("epochs", c.metric.epochs);
    s.read("batch_size", c.metric.batch_size);
    s.read("learning_rate", c.metric.learning_rate);
    s.read("checkpoint_every", c.metric.checkpoint_every);
  }
  if (r.has("graph")) {
    Reader s(r.at("graph"), "graph");
    s.allow({"gamma_m", "reward_mode"});
    s.read("gamma_m", c.graph.gamma_m);
    s.read("reward_mode", c.graph.reward_mode);
  }
  if (r.has("plan")) {
    Reader s(r.at("plan"), "plan");
    s.allow({"discount", "search_horizon", "subgoal_index", "greedy"});
    s.read("discount", c.plan.discount);
    if (s.has("search_horizon") && s.at("search_horizon").is_string()) {
      if (s.at("search_horizon").get<std::string>() != "inf") {
        throw ConfigError("plan.search_horizon", "search_horizon must be an integer, \"inf\" or null");
      }
      c.plan.search_horizon.reset();
    } else {
      s.read_optional("search_horizon", c.plan.search_horizon);
    }
    s.read("subgoal_index", c.plan.subgoal_index);
    s.read("greedy", c.plan.greedy);
  }
  if (r.has("translator")) {
    Reader s(r.at("translator"), "translator");
    s.allow({"horizon", "epochs", "batch_size", "learning_rate", "checkpoint_every"});
    s.read("horizon", c.translator.horizon);
    s.read("epochs", c.translator.epochs);
    s.read("batch_size", c.translator.batch_size);
    s.read("learning_rate", c.translator.learning_rate);
    s.read("checkpoint_every", c.translator.checkpoint_every);
  }
  if (r.has("eval")) {
    Reader s(r.at("eval"), "eval");
    s.allow({"episodes", "model_seeds", "seed_base", "checkpoint", "select_from_epoch", "selection_episodes"});
    s.read("episodes", c.eval.episodes);
    s.read("model_seeds", c.eval.model_seeds);
    s.read("seed_base", c.eval.seed_base);
    s.read("checkpoint", c.eval.checkpoint);
    s.read("select_from_epoch", c.eval.select_from_epoch);
    s.read("selection_episodes", c.eval.selection_episodes);
  }
  validate(c);
  return c;
}

PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string to_json(const PipelineConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["env"] = {{"name", c.env.name}, {"layout", opt_json(c.env.layout)}, {"start", cell_json(c.env.start)},
              {"goal", cell_json(c.env.goal)}};
  j["collect"] = {{"dataset", opt_json(c.collect.dataset)},
                  {"mode", c.collect.mode},
                  {"episodes", c.collect.episodes},
                  {"max_transitions", opt_json(c.collect.max_transitions)},
                  {"max_episode_steps", c.collect.max_episode_steps},
                  {"action_noise", c.collect.action_noise},
                  {"wander_prob", c.collect.wander_prob},
                  {"wander_steps", c.collect.wander_steps}};
  j["metric"] = {{"metric_dim", c.metric.metric_dim},         {"margin", c.metric.margin},
                 {"epochs", c.metric.epochs},                 {"batch_size", c.metric.batch_size},
                 {"learning_rate", c.metric.learning_rate},   {"checkpoint_every", c.metric.checkpoint_every}};
  j["graph"] = {{"gamma_m", c.graph.gamma_m}, {"reward_mode", c.graph.reward_mode}};
  j["plan"] = {{"discount", c.plan.discount},
               {"search_horizon", opt_json(c.plan.search_horizon)},
               {"subgoal_index", c.plan.subgoal_index},
               {"greedy", c.plan.greedy}};
  j["translator"] = {{"horizon", c.translator.horizon},
                     {"epochs", c.translator.epochs},
                     {"batch_size", c.translator.batch_size},
                     {"learning_rate", c.translator.learning_rate},
                     {"checkpoint_every", c.translator.checkpoint_every}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"model_seeds", c.eval.model_seeds},
               {"seed_base", c.eval.seed_base},
               {"checkpoint", c.eval.checkpoint},
               {"select_from_epoch", c.eval.select_from_epoch},
               {"selection_episodes", c.eval.selection_episodes}};
  return j.dump(2) + "\n";
}

env::MazeLayout resolve_layout(const EnvSection& section) {
  if (section.layout) return env::MazeLayout::load(*section.layout);
  if (section.name == "pointmaze-umaze") return env::builtin_layout("umaze");
  if (section.name == "pointmaze-medium") return env::builtin_layout("medium");
  throw ConfigError("env.layout", "layout is required for env '" + section.name + "'");
}

std::unique_ptr<env::Env> make_env(const EnvSection& section) {
  if (section.name == "chain") return std::make_unique<env::ChainEnv>();
  env::MazeTask task;
  if (section.start) task.start = env::Cell{(*section.start)[0], (*section.start)[1]};
  if (section.goal) task.goal = env::Cell{(*section.goal)[0], (*section.goal)[1]};
  return std::make_unique<env::PointMazeEnv>(resolve_layout(section), task);
}

}  // namespace vmg::config

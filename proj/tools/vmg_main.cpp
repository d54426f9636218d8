// vmg: command-line front end for the Value Memory Graph pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "vmg/agent.hpp"
#include "vmg/binary_io.hpp"
#include "vmg/config.hpp"
#include "vmg/envs.hpp"
#include "vmg/errors.hpp"
#include "vmg/graph.hpp"
#include "vmg/pipeline.hpp"
#include "vmg/rewards.hpp"

namespace fs = std::filesystem;
using namespace vmg;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

config::PipelineConfig load_config(const Common& c) {
  config::PipelineConfig cfg = c.config_path.empty() ? config::parse_config_text("") : config::parse_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("--config", c.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Seed override");
}

config::EnvSection env_section(const std::string& name, const std::string& layout) {
  config::EnvSection s;
  s.name = name;
  if (!layout.empty()) s.layout = layout;
  return s;
}

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value Memory Graph: offline RL via graph planning over a learned metric space"};
  app.require_subcommand(1);

  // ---- collect
  Common collect_c;
  std::string collect_env = "pointmaze-umaze", collect_layout, collect_out, collect_mode = "diverse";
  std::size_t collect_episodes = 2000;
  std::optional<std::size_t> collect_max;
  double collect_noise = 0.3, collect_wander = 0.05;
  auto* collect = app.add_subcommand("collect", "Collect a dataset with the scripted behavior policy");
  add_common(collect, collect_c, false);
  collect->add_option("--env", collect_env, "pointmaze-umaze | pointmaze-medium | pointmaze | chain");
  collect->add_option("--layout", collect_layout, "Maze layout file")->check(CLI::ExistingFile);
  collect->add_option("--episodes", collect_episodes, "Episode count");
  collect->add_option("--max-transitions", collect_max, "Stop once this many transitions were collected");
  collect->add_option("--mode", collect_mode, "diverse | goal")->check(CLI::IsMember({"diverse", "goal"}));
  collect->add_option("--noise", collect_noise, "Action noise sigma");
  collect->add_option("--wander", collect_wander, "Per-step excursion probability");
  collect->add_option("--out", collect_out, "Output dataset (.vmgd for binary, JSONL otherwise)")->required();

  // ---- dataset validate
  std::string validate_path;
  auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
  dataset_cmd->require_subcommand(1);
  auto* validate = dataset_cmd->add_subcommand("validate", "Load a dataset and check every invariant");
  validate->add_option("path", validate_path)->required()->check(CLI::ExistingFile);

  // ---- train-metric / train-translator
  Common tm_c, tt_c;
  std::string tm_data, tm_out, tm_ckpt, tt_data, tt_out, tt_ckpt;
  auto* train_metric = app.add_subcommand("train-metric", "Train the state/action encoders and action decoder");
  add_common(train_metric, tm_c);
  train_metric->add_option("--dataset", tm_data)->required()->check(CLI::ExistingFile);
  train_metric->add_option("--out", tm_out, "Model checkpoint path")->required();
  train_metric->add_option("--checkpoint-dir", tm_ckpt, "Directory for periodic checkpoints");
  auto* train_tran = app.add_subcommand("train-translator", "Train the goal-conditioned action translator");
  add_common(train_tran, tt_c);
  train_tran->add_option("--dataset", tt_data)->required()->check(CLI::ExistingFile);
  train_tran->add_option("--out", tt_out, "Model checkpoint path")->required();
  train_tran->add_option("--checkpoint-dir", tt_ckpt, "Directory for periodic checkpoints");

  // ---- build-graph
  Common bg_c;
  std::string bg_data, bg_metric, bg_out, bg_mode;
  std::optional<double> bg_gamma;
  auto* build = app.add_subcommand("build-graph", "Build the memory graph from a dataset and metric model");
  add_common(build, bg_c);
  build->add_option("--dataset", bg_data)->required()->check(CLI::ExistingFile);
  build->add_option("--metric", bg_metric)->required()->check(CLI::ExistingFile);
  build->add_option("--gamma-m", bg_gamma, "Merge threshold override");
  build->add_option("--reward-mode", bg_mode, "avg_with_internal | max | sum | rm | rm_h | rm_t");
  build->add_option("--out", bg_out)->required();

  // ---- plan
  Common pl_c;
  std::string pl_graph, pl_out;
  std::optional<double> pl_discount;
  auto* plan_cmd = app.add_subcommand("plan", "Run value iteration on a graph");
  add_common(plan_cmd, pl_c);
  plan_cmd->add_option("--graph", pl_graph)->required()->check(CLI::ExistingFile);
  plan_cmd->add_option("--discount", pl_discount);
  plan_cmd->add_option("--out", pl_out)->required();

  // ---- evaluate
  Common ev_c;
  std::string ev_bundle, ev_env = "pointmaze-umaze", ev_layout, ev_out;
  std::size_t ev_episodes = 100, ev_seeds = 3;
  std::uint64_t ev_base = 1000;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate an agent bundle");
  add_common(evaluate, ev_c, false);
  evaluate->add_option("--agent", ev_bundle, "Agent bundle (agents.json)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--env", ev_env);
  evaluate->add_option("--layout", ev_layout)->check(CLI::ExistingFile);
  evaluate->add_option("--episodes", ev_episodes);
  evaluate->add_option("--seeds", ev_seeds, "Number of model seeds from the bundle");
  evaluate->add_option("--seed-base", ev_base, "First episode seed");
  evaluate->add_option("--out", ev_out, "Report file (stdout when omitted)");

  // ---- relabel
  Common rl_c;
  std::string rl_bundle, rl_data, rl_reward, rl_out;
  auto* relabel = app.add_subcommand("relabel", "Relabel rewards and replan without retraining");
  add_common(relabel, rl_c, false);
  relabel->add_option("--agent", rl_bundle)->required()->check(CLI::ExistingFile);
  relabel->add_option("--dataset", rl_data)->required()->check(CLI::ExistingFile);
  relabel->add_option("--reward", rl_reward, "zero | maze-goal:X,Y,R | maze-cell:LAYOUT,C,R | chain-goal:G")->required();
  relabel->add_option("--out", rl_out, "Output directory for the new bundle")->required();

  // ---- export-layout
  Common ex_c;
  std::string ex_graph, ex_values, ex_out;
  auto* export_cmd = app.add_subcommand("export-layout", "2-D projection of a graph for visualization");
  add_common(export_cmd, ex_c, false);
  export_cmd->add_option("--graph", ex_graph)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--values", ex_values)->check(CLI::ExistingFile);
  export_cmd->add_option("--out", ex_out)->required();

  // ---- run-pipeline / replay / config
  Common rp_c;
  std::string rp_out;
  auto* run = app.add_subcommand("run-pipeline", "collect -> train -> build-graph -> plan -> evaluate, with caching");
  add_common(run, rp_c);
  run->add_option("--out", rp_out, "Run directory (default: $VMG_OUTPUT_ROOT/<config name>)");

  Common re_c;
  std::string re_manifest, re_out;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare every artifact hash");
  add_common(replay, re_c, false);
  replay->add_option("--manifest", re_manifest)->required()->check(CLI::ExistingFile);
  replay->add_option("--out", re_out, "Fresh run directory")->required();

  Common cs_c;
  auto* show = app.add_subcommand("config", "Print the fully resolved config");
  add_common(show, cs_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*collect) {
      auto env = config::make_env(env_section(collect_env, collect_layout));
      const std::uint64_t seed = collect_c.seed.value_or(0);
      env::CollectReport r = [&] {
        if (auto* chain = dynamic_cast<env::ChainEnv*>(env.get())) {
          return env::collect_chain_dataset(*chain, {collect_episodes, seed, 0.5, collect_noise});
        }
        env::MazeCollectConfig mc;
        mc.mode = collect_mode == "goal" ? env::CollectMode::goal : env::CollectMode::diverse;
        mc.episodes = collect_episodes;
        mc.max_transitions = collect_max;
        mc.seed = seed;
        mc.follower.action_noise = collect_noise;
        mc.follower.wander_prob = collect_wander;
        return env::collect_maze_dataset(dynamic_cast<env::PointMazeEnv&>(*env), mc);
      }();
      data::save(r.dataset, collect_out);
      std::cout << "episodes " << r.dataset.episodes().size() << ", transitions " << r.dataset.transition_count()
                << ", coverage " << r.coverage << ", reached target " << r.episodes_reaching_target << "\n";
    } else if (*validate) {
      const data::Dataset ds = data::load(validate_path);
      std::cout << "ok: " << ds.episodes().size() << " episodes, " << ds.transition_count() << " transitions, state_dim "
                << ds.state_dim() << ", action_dim " << ds.action_dim() << "\n";
    } else if (*train_metric) {
      const auto cfg = load_config(tm_c);
      const data::Dataset ds = data::load(tm_data);
      std::optional<std::string> dir;
      if (!tm_ckpt.empty()) dir = tm_ckpt;
      const auto res = metric::train_metric(ds, cfg.metric_config(cfg.seed), dir);
      metric::save_model(res.model, tm_out);
      const auto& last = res.curve.back();
      std::cout << "epochs " << last.epoch << ", steps " << res.steps << ", L_c " << last.contrastive << ", L_a "
                << last.action << "\n";
    } else if (*train_tran) {
      const auto cfg = load_config(tt_c);
      const data::Dataset ds = data::load(tt_data);
      std::optional<std::string> dir;
      if (!tt_ckpt.empty()) dir = tt_ckpt;
      const auto res = translator::train_translator(ds, cfg.translator_config(cfg.seed), dir);
      translator::save_model(res.model, tt_out);
      std::cout << "epochs " << res.curve.back().epoch << ", steps " << res.steps << ", loss " << res.curve.back().loss
                << "\n";
    } else if (*build) {
      const auto cfg = load_config(bg_c);
      const data::Dataset ds = data::load(bg_data);
      const auto model = metric::load_model(bg_metric);
      const auto mode = bg_mode.empty() ? cfg.reward_mode() : graph::parse_reward_mode(bg_mode);
      const auto g = graph::build_graph(model, ds, bg_gamma.value_or(cfg.graph.gamma_m), mode);
      graph::save_graph(g, bg_out);
      const auto st = graph::graph_stats(g, ds);
      std::cout << "vertices " << st.vertex_count << ", edges " << st.edge_count << ", env/graph transitions "
                << st.env_per_graph_transition << "\n";
    } else if (*plan_cmd) {
      const auto cfg = load_config(pl_c);
      const auto g = graph::load_graph(pl_graph);
      const auto v = plan::value_iteration(g, pl_discount.value_or(cfg.plan.discount));
      agent::save_values(v, pl_out);
      std::cout << "iterations " << v.iterations_run << ", converged " << (v.converged ? "yes" : "no") << "\n";
    } else if (*evaluate) {
      auto env = config::make_env(env_section(ev_env, ev_layout));
      auto agents = agent::load_agents(ev_bundle, env->spec().action_bounds);
      if (ev_seeds < agents.size()) agents.erase(agents.begin() + static_cast<std::ptrdiff_t>(ev_seeds), agents.end());
      const auto report = agent::evaluate(agents, *env, ev_episodes, ev_c.seed.value_or(ev_base));
      const std::string text = agent::encode_report(report);
      if (ev_out.empty()) {
        std::cout << text;
      } else {
        io::write_text_file(ev_out, text);
        std::cout << "success " << report.success_mean << " +- " << report.success_std << ", normalized "
                  << report.normalized_mean << " +- " << report.normalized_std << "\n";
      }
    } else if (*relabel) {
      const agent::AgentBundle bundle = agent::load_bundle(rl_bundle);
      const fs::path base = fs::absolute(rl_bundle).parent_path();
      const data::Dataset ds = data::load(rl_data);
      const auto reward = rewards::parse_reward_spec(rl_reward);
      fs::create_directories(rl_out);
      agent::AgentBundle out = bundle;
      out.entries.clear();
      for (const auto& e : bundle.entries) {
        auto abs = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
        auto m = std::make_shared<const metric::MetricModel>(metric::load_model(abs(e.metric_path)));
        auto t = std::make_shared<const translator::TranslatorModel>(translator::load_model(abs(e.translator_path)));
        auto g = std::make_shared<const graph::MemoryGraph>(graph::load_graph(abs(e.graph_path)));
        agent::ActionBounds bounds(t->action_dim(), {-1.0, 1.0});
        const agent::Agent original(m, g, t, bundle.plan, bounds);
        const auto t0 = std::chrono::steady_clock::now();
        const agent::Agent replanned = agent::relabel_and_replan(original, ds, reward);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string tag = "seed_" + std::to_string(e.seed);
        graph::save_graph(replanned.graph(), (fs::path(rl_out) / (tag + "_graph.json")).string());
        agent::save_values(replanned.values(), (fs::path(rl_out) / (tag + "_values.json")).string());
        out.entries.push_back({e.seed, abs(e.metric_path), abs(e.translator_path), tag + "_graph.json", tag + "_values.json"});
        std::cout << tag << ": replanned in " << secs << " s\n";
      }
      agent::save_bundle(out, (fs::path(rl_out) / "agents.json").string());
    } else if (*export_cmd) {
      const auto g = graph::load_graph(ex_graph);
      std::vector<double> values;
      if (!ex_values.empty()) values = agent::load_values(ex_values).values;
      io::write_text_file(ex_out, graph::encode_layout(g, values));
    } else if (*run) {
      const auto cfg = load_config(rp_c);
      std::string out = rp_out;
      if (out.empty()) {
        const std::string stem = rp_c.config_path.empty() ? "default" : fs::path(rp_c.config_path).stem().string();
        out = (fs::path(pipeline::output_root()) / stem).string();
      }
      const auto manifest = pipeline::run_pipeline(cfg, out, {&std::cerr});
      for (const auto& s : manifest.stages) std::cout << s.name << ": " << pipeline::to_string(s.status) << "\n";
      std::cout << "manifest: " << (fs::path(out) / pipeline::paths::kManifest).string() << "\n";
    } else if (*replay) {
      const auto diffs = pipeline::replay_manifest(re_manifest, re_out, {&std::cerr});
      for (const auto& d : diffs) std::cout << d << "\n";
      std::cout << (diffs.empty() ? "all artifact hashes reproduced\n" : "replay differs\n");
      return diffs.empty() ? 0 : 1;
    } else if (*show) {
      std::cout << config::to_json(load_config(cs_c));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error (" << e.key() << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    print_nested(e);
    return 1;
  }
  return 0;
}

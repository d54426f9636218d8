#include "vmg/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>

#include "vmg/agent.hpp"
#include "vmg/binary_io.hpp"
#include "vmg/errors.hpp"
#include "vmg/hash.hpp"

namespace vmg::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(StageStatus status) {
  switch (status) {
    case StageStatus::ran: return "ran";
    case StageStatus::cached: return "cached";
    case StageStatus::failed: return "failed";
  }
  return "failed";
}

namespace {

StageStatus parse_status(const std::string& s) {
  if (s == "ran") return StageStatus::ran;
  if (s == "cached") return StageStatus::cached;
  if (s == "failed") return StageStatus::failed;
  throw SchemaError("unknown stage status: " + s);
}

std::string seed_file(std::uint64_t seed, const char* name) { return paths::seed_dir(seed) + "/" + name; }

std::string epoch_file(std::uint64_t seed, const char* kind, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "/%s_ckpt/%s_epoch_%04zu.ckpt", kind, kind, epoch);
  return paths::seed_dir(seed) + buf;
}

std::string read_text(const fs::path& p) {
  const auto bytes = io::read_file(p.string());
  return {bytes.begin(), bytes.end()};
}

class Runner {
 public:
  Runner(fs::path dir, std::optional<Manifest> previous, std::string config_json, std::ostream* log)
      : dir_(std::move(dir)), previous_(std::move(previous)), log_(log) {
    current_.config_json = std::move(config_json);
  }

  using Body = std::function<std::vector<std::string>()>;

  /// Runs or reuses one stage. Returns true if the body executed.
  bool stage(const std::string& name, const ordered_json& slice, const std::vector<std::string>& inputs, const Body& body) {
    StageRecord rec;
    rec.name = name;
    try {
      for (const auto& in : inputs) rec.inputs[in] = hash_of(in);
    } catch (const std::exception& e) {
      rec.status = StageStatus::failed;
      rec.error = e.what();
      current_.stages.push_back(rec);
      save();
      throw;
    }
    std::string material = name + "\n" + slice.dump() + "\n";
    for (const auto& [path, hash] : rec.inputs) material += path + "=" + hash + "\n";
    rec.key = sha256_hex(material);

    if (const StageRecord* old = previous_ ? previous_->find(name) : nullptr;
        old && old->key == rec.key && old->status != StageStatus::failed && outputs_present(*old)) {
      for (const auto& [path, hash] : old->outputs) {
        if (sha256_file(dir_ / path) != hash) {
          rec.status = StageStatus::failed;
          rec.error = "content hash mismatch for " + path;
          current_.stages.push_back(rec);
          save();
          throw HashMismatch(name, (dir_ / path).string());
        }
      }
      rec.status = StageStatus::cached;
      rec.outputs = old->outputs;
      current_.stages.push_back(rec);
      save();
      if (log_) *log_ << "[" << name << "] cached\n";
      return false;
    }

    if (log_) *log_ << "[" << name << "] running\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::vector<std::string> outputs = body();
      for (const auto& out : outputs) rec.outputs[out] = sha256_file(dir_ / out);
    } catch (const std::exception& e) {
      rec.status = StageStatus::failed;
      rec.error = e.what();
      rec.seconds = seconds_since(t0);
      current_.stages.push_back(rec);
      save();
      throw;
    }
    rec.status = StageStatus::ran;
    rec.seconds = seconds_since(t0);
    current_.stages.push_back(rec);
    save();
    if (log_) *log_ << "[" << name << "] done in " << rec.seconds << " s\n";
    return true;
  }

  const Manifest& manifest() const { return current_; }
  fs::path path(const std::string& rel) const { return dir_ / rel; }

  /// Output paths recorded by an already-processed stage in this run.
  const std::map<std::string, std::string>& outputs_of(const std::string& name) const {
    const StageRecord* rec = current_.find(name);
    if (!rec) throw InternalConsistencyError("stage not yet processed: " + name);
    return rec->outputs;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  bool outputs_present(const StageRecord& rec) const {
    for (const auto& [path, _] : rec.outputs) {
      if (!fs::exists(dir_ / path)) return false;
    }
    return !rec.outputs.empty();
  }

  std::string hash_of(const std::string& path) const {
    for (const auto& s : current_.stages) {
      if (auto it = s.outputs.find(path); it != s.outputs.end()) return it->second;
    }
    const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : dir_ / path;
    return sha256_file(p);
  }

  void save() const { io::write_text_file((dir_ / paths::kManifest).string(), encode_manifest(current_)); }

  fs::path dir_;
  std::optional<Manifest> previous_;
  Manifest current_;
  std::ostream* log_;
};

void write_json(const fs::path& p, const ordered_json& j) { io::write_text_file(p.string(), j.dump(2) + "\n"); }

}  // namespace

const StageRecord* Manifest::find(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string encode_manifest(const Manifest& m) {
  ordered_json j;
  j["format"] = "vmg-manifest";
  j["version"] = 1;
  j["config"] = ordered_json::parse(m.config_json);
  ordered_json stages = ordered_json::array();
  for (const auto& s : m.stages) {
    ordered_json sj;
    sj["name"] = s.name;
    sj["key"] = s.key;
    sj["status"] = to_string(s.status);
    sj["seconds"] = s.seconds;
    sj["inputs"] = s.inputs;
    sj["outputs"] = s.outputs;
    if (!s.error.empty()) sj["error"] = s.error;
    stages.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages);
  return j.dump(2) + "\n";
}

Manifest decode_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what(), 1);
  }
  try {
    if (j.at("format").get<std::string>() != "vmg-manifest") throw SchemaError("not a vmg-manifest document");
    Manifest m;
    m.config_json = config::to_json(config::parse_config_text(j.at("config").dump()));
    for (const auto& sj : j.at("stages")) {
      StageRecord s;
      s.name = sj.at("name").get<std::string>();
      s.key = sj.at("key").get<std::string>();
      s.status = parse_status(sj.at("status").get<std::string>());
      s.seconds = sj.at("seconds").get<double>();
      s.inputs = sj.at("inputs").get<std::map<std::string, std::string>>();
      s.outputs = sj.at("outputs").get<std::map<std::string, std::string>>();
      s.error = sj.value("error", std::string());
      m.stages.push_back(std::move(s));
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
}

Manifest load_manifest(const std::string& path) { return decode_manifest(read_text(path)); }

std::string output_root() {
  const char* root = std::getenv("VMG_OUTPUT_ROOT");
  return (root && *root) ? std::string(root) : std::string("runs");
}

std::string paths::seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }
std::string paths::metric(std::uint64_t seed) { return seed_file(seed, "metric.ckpt"); }
std::string paths::translator(std::uint64_t seed) { return seed_file(seed, "translator.ckpt"); }
std::string paths::graph(std::uint64_t seed) { return seed_file(seed, "graph.json"); }
std::string paths::values(std::uint64_t seed) { return seed_file(seed, "values.json"); }

Manifest run_pipeline(const config::PipelineConfig& config, const std::string& run_dir, const RunOptions& options) {
  config::validate(config);
  const fs::path dir(run_dir);
  fs::create_directories(dir);
  std::optional<Manifest> previous;
  if (fs::exists(dir / paths::kManifest)) previous = load_manifest((dir / paths::kManifest).string());

  const std::string config_json = config::to_json(config);
  const ordered_json cfg = ordered_json::parse(config_json);
  Runner run(dir, std::move(previous), config_json, options.log);

  std::unique_ptr<env::Env> environment = config::make_env(config.env);
  const agent::ActionBounds bounds = environment->spec().action_bounds;

  // Dataset is loaded at most once, and only from the declared artifact.
  std::shared_ptr<const data::Dataset> dataset;
  auto get_dataset = [&]() -> const data::Dataset& {
    if (!dataset) dataset = std::make_shared<const data::Dataset>(data::load(run.path(paths::kDataset).string()));
    return *dataset;
  };

  // ---- collect
  {
    std::vector<std::string> inputs;
    if (config.collect.dataset) inputs.push_back(fs::absolute(*config.collect.dataset).string());
    run.stage("collect", {{"env", cfg["env"]}, {"collect", cfg["collect"]}, {"seed", config.seed}}, inputs, [&] {
      ordered_json report;
      if (config.collect.dataset) {
        const data::Dataset ds = data::load(*config.collect.dataset);
        data::save(ds, run.path(paths::kDataset).string());
        report["source"] = *config.collect.dataset;
      } else if (auto* chain = dynamic_cast<env::ChainEnv*>(environment.get())) {
        env::ChainCollectConfig cc;
        cc.episodes = config.collect.episodes;
        cc.seed = config.seed;
        cc.action_noise = config.collect.action_noise;
        const env::CollectReport r = env::collect_chain_dataset(*chain, cc);
        data::save(r.dataset, run.path(paths::kDataset).string());
        report["coverage"] = r.coverage;
        report["transitions"] = r.dataset.transition_count();
      } else {
        auto& maze = dynamic_cast<env::PointMazeEnv&>(*environment);
        env::MazeCollectConfig mc;
        mc.mode = config.collect.mode == "goal" ? env::CollectMode::goal : env::CollectMode::diverse;
        mc.episodes = config.collect.episodes;
        mc.max_transitions = config.collect.max_transitions;
        mc.max_episode_steps = config.collect.max_episode_steps;
        mc.seed = config.seed;
        mc.follower.action_noise = config.collect.action_noise;
        mc.follower.wander_prob = config.collect.wander_prob;
        mc.follower.wander_steps = config.collect.wander_steps;
        const env::CollectReport r = env::collect_maze_dataset(maze, mc);
        data::save(r.dataset, run.path(paths::kDataset).string());
        report["coverage"] = r.coverage;
        report["transitions"] = r.dataset.transition_count();
        report["episodes"] = r.dataset.episodes().size();
        report["episodes_reaching_target"] = r.episodes_reaching_target;
      }
      write_json(run.path("collect_report.json"), report);
      return std::vector<std::string>{paths::kDataset, "collect_report.json"};
    });
  }

  // ---- per-seed training and graph construction
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < config.eval.model_seeds; ++i) seeds.push_back(config.model_seed(i));

  for (const std::uint64_t seed : seeds) {
    const std::string sdir = paths::seed_dir(seed);
    fs::create_directories(run.path(sdir));
    const std::string tag = "[" + std::to_string(seed) + "]";

    run.stage("train-metric" + tag, {{"metric", cfg["metric"]}, {"seed", seed}}, {paths::kDataset}, [&] {
      const auto result = metric::train_metric(get_dataset(), config.metric_config(seed), run.path(sdir + "/metric_ckpt").string());
      metric::save_model(result.model, run.path(sdir + "/metric_final.ckpt").string());
      ordered_json curve = ordered_json::array();
      for (const auto& e : result.curve) curve.push_back({e.epoch, e.contrastive, e.action, e.total});
      write_json(run.path(sdir + "/metric_curve.json"), {{"columns", {"epoch", "contrastive", "action", "total"}}, {"rows", curve}});
      std::vector<std::string> outs{sdir + "/metric_final.ckpt", sdir + "/metric_curve.json"};
      for (const auto& [epoch, _] : result.checkpoints) outs.push_back(epoch_file(seed, "metric", epoch));
      return outs;
    });

    run.stage("train-translator" + tag, {{"translator", cfg["translator"]}, {"seed", seed}}, {paths::kDataset}, [&] {
      const auto result = translator::train_translator(get_dataset(), config.translator_config(seed),
                                                       run.path(sdir + "/translator_ckpt").string());
      translator::save_model(result.model, run.path(sdir + "/translator_final.ckpt").string());
      ordered_json curve = ordered_json::array();
      for (const auto& e : result.curve) curve.push_back({e.epoch, e.loss});
      write_json(run.path(sdir + "/translator_curve.json"), {{"columns", {"epoch", "loss"}}, {"rows", curve}});
      std::vector<std::string> outs{sdir + "/translator_final.ckpt", sdir + "/translator_curve.json"};
      for (const auto& [epoch, _] : result.checkpoints) outs.push_back(epoch_file(seed, "translator", epoch));
      return outs;
    });

    // ---- checkpoint selection
    const bool by_eval = config.eval.checkpoint == "eval";
    std::vector<std::string> sel_inputs{sdir + "/metric_final.ckpt", sdir + "/translator_final.ckpt"};
    std::vector<std::size_t> candidates;
    if (by_eval) {
      sel_inputs.push_back(paths::kDataset);
      const auto& m_out = run.outputs_of("train-metric" + tag);
      const auto& t_out = run.outputs_of("train-translator" + tag);
      for (std::size_t e = config.eval.select_from_epoch; e <= std::min(config.metric.epochs, config.translator.epochs); ++e) {
        const std::string mp = epoch_file(seed, "metric", e);
        const std::string tp = epoch_file(seed, "translator", e);
        if (m_out.contains(mp) && t_out.contains(tp)) {
          candidates.push_back(e);
          sel_inputs.push_back(mp);
          sel_inputs.push_back(tp);
        }
      }
    }
    ordered_json sel_slice = {{"checkpoint", config.eval.checkpoint}};
    if (by_eval) {
      sel_slice["eval"] = cfg["eval"];
      sel_slice["graph"] = cfg["graph"];
      sel_slice["plan"] = cfg["plan"];
      sel_slice["env"] = cfg["env"];
    }
    run.stage("select-checkpoint" + tag, sel_slice, sel_inputs, [&] {
      ordered_json info;
      if (!by_eval || candidates.empty()) {
        fs::copy_file(run.path(sdir + "/metric_final.ckpt"), run.path(paths::metric(seed)), fs::copy_options::overwrite_existing);
        fs::copy_file(run.path(sdir + "/translator_final.ckpt"), run.path(paths::translator(seed)),
                      fs::copy_options::overwrite_existing);
        info["selected"] = "final";
      } else {
        // Held-out episode seeds so selection does not peek at the reported evaluation.
        const std::uint64_t selection_base = config.eval.seed_base + 1'000'000;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_epoch = candidates.back();
        ordered_json scores = ordered_json::object();
        for (const std::size_t e : candidates) {
          auto m = std::make_shared<const metric::MetricModel>(metric::load_model(run.path(epoch_file(seed, "metric", e)).string()));
          auto t = std::make_shared<const translator::TranslatorModel>(
              translator::load_model(run.path(epoch_file(seed, "translator", e)).string()));
          auto g = std::make_shared<const graph::MemoryGraph>(
              graph::build_graph(*m, get_dataset(), config.graph.gamma_m, config.reward_mode()));
          const agent::Agent a(m, g, t, config.plan_config(), bounds);
          const auto report = agent::evaluate(std::span(&a, 1), *environment, config.eval.selection_episodes, selection_base);
          scores[std::to_string(e)] = report.return_mean;
          if (report.return_mean >= best) {
            best = report.return_mean;
            best_epoch = e;
          }
        }
        fs::copy_file(run.path(epoch_file(seed, "metric", best_epoch)), run.path(paths::metric(seed)),
                      fs::copy_options::overwrite_existing);
        fs::copy_file(run.path(epoch_file(seed, "translator", best_epoch)), run.path(paths::translator(seed)),
                      fs::copy_options::overwrite_existing);
        info["selected"] = best_epoch;
        info["scores"] = scores;
      }
      write_json(run.path(sdir + "/selection.json"), info);
      return std::vector<std::string>{paths::metric(seed), paths::translator(seed), sdir + "/selection.json"};
    });

    run.stage("build-graph" + tag, {{"graph", cfg["graph"]}}, {paths::kDataset, paths::metric(seed)}, [&] {
      const metric::MetricModel m = metric::load_model(run.path(paths::metric(seed)).string());
      const graph::MemoryGraph g = graph::build_graph(m, get_dataset(), config.graph.gamma_m, config.reward_mode());
      graph::save_graph(g, run.path(paths::graph(seed)).string());
      const graph::GraphStats st = graph::graph_stats(g, get_dataset());
      write_json(run.path(sdir + "/graph_stats.json"), {{"vertices", st.vertex_count},
                                                         {"edges", st.edge_count},
                                                         {"env_transitions", st.env_transitions},
                                                         {"graph_transitions", st.graph_transitions},
                                                         {"reward_min", st.reward_min},
                                                         {"reward_max", st.reward_max}});
      return std::vector<std::string>{paths::graph(seed), sdir + "/graph_stats.json"};
    });

    run.stage("plan" + tag, {{"discount", config.plan.discount}}, {paths::graph(seed)}, [&] {
      const graph::MemoryGraph g = graph::load_graph(run.path(paths::graph(seed)).string());
      agent::save_values(plan::value_iteration(g, config.plan.discount), run.path(paths::values(seed)).string());
      return std::vector<std::string>{paths::values(seed)};
    });
  }

  // ---- evaluate
  {
    std::vector<std::string> inputs;
    for (const std::uint64_t seed : seeds) {
      for (const auto& p : {paths::metric(seed), paths::translator(seed), paths::graph(seed), paths::values(seed)}) {
        inputs.push_back(p);
      }
    }
    ordered_json eval_slice = cfg["eval"];
    eval_slice.erase("select_from_epoch");
    eval_slice.erase("selection_episodes");
    run.stage("evaluate", {{"eval", eval_slice}, {"env", cfg["env"]}, {"plan", cfg["plan"]}}, inputs, [&] {
      agent::AgentBundle bundle;
      bundle.env_name = config.env.name;
      bundle.plan = config.plan_config();
      for (const std::uint64_t seed : seeds) {
        bundle.entries.push_back({seed, paths::metric(seed), paths::translator(seed), paths::graph(seed), paths::values(seed)});
      }
      agent::save_bundle(bundle, run.path(paths::kBundle).string());
      const auto agents = agent::load_agents(run.path(paths::kBundle).string(), bounds);
      const auto report = agent::evaluate(agents, *environment, config.eval.episodes, config.eval.seed_base);
      io::write_text_file(run.path(paths::kReport).string(), agent::encode_report(report));
      return std::vector<std::string>{paths::kBundle, paths::kReport};
    });
  }
  return run.manifest();
}

std::vector<std::string> replay_manifest(const std::string& manifest_path, const std::string& run_dir,
                                         const RunOptions& options) {
  const Manifest original = load_manifest(manifest_path);
  const config::PipelineConfig cfg = config::parse_config_text(original.config_json);
  const Manifest replayed = run_pipeline(cfg, run_dir, options);
  std::vector<std::string> diffs;
  for (const auto& stage : original.stages) {
    const StageRecord* other = replayed.find(stage.name);
    if (!other) {
      diffs.push_back(stage.name + ": stage missing from replay");
      continue;
    }
    for (const auto& [path, hash] : stage.outputs) {
      auto it = other->outputs.find(path);
      if (it == other->outputs.end()) {
        diffs.push_back(stage.name + ": " + path + " not produced");
      } else if (it->second != hash) {
        diffs.push_back(stage.name + ": " + path + " hash differs");
      }
    }
  }
  return diffs;
}

}  // namespace vmg::pipeline

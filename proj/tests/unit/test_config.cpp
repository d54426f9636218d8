#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "vmg/config.hpp"
#include "vmg/errors.hpp"
#include "vmg/rewards.hpp"

using namespace vmg;

namespace {

ConfigError config_error(const std::string& text) {
  try {
    config::validate(config::parse_config_text(text));
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected ConfigError for " << text);
  return ConfigError("", "");
}

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  const auto a = config::parse_config_text("");
  const auto b = config::parse_config_text("{}");
  CHECK(a == b);
  CHECK(a == config::PipelineConfig{});
  CHECK(a.preset == "antmaze");
  CHECK(a.graph.gamma_m == 0.8);
  CHECK(a.plan.discount == 0.8);
  CHECK(a.plan.subgoal_index == 1);
  CHECK_FALSE(a.plan.search_horizon.has_value());
  CHECK(a.translator.horizon == 10);
  CHECK(a.metric.metric_dim == 10);
  CHECK(a.metric.margin == 1.0);
  CHECK(a.metric.batch_size == 100);
  CHECK(a.metric.learning_rate == 1e-3);
  CHECK(a.metric.epochs == 800);
  CHECK(a.eval.episodes == 100);
  CHECK_NOTHROW(config::validate(a));
}

TEST_CASE("presets match the per-domain table") {
  struct Row {
    const char* name;
    double gamma_m, discount;
    std::size_t n_sg;
    std::optional<std::size_t> n_s;
  };
  const Row rows[] = {{"kitchen", 0.5, 0.95, 2, std::nullopt},
                      {"antmaze", 0.8, 0.8, 1, std::nullopt},
                      {"pen", 0.3, 0.8, 2, 12},
                      {"hammer", 1.0, 0.8, 2, 12},
                      {"door", 0.3, 0.8, 2, 12}};
  for (const auto& r : rows) {
    CAPTURE(r.name);
    const auto c = config::parse_config_text(std::string(R"({"preset":")") + r.name + R"("})");
    CHECK(c.graph.gamma_m == r.gamma_m);
    CHECK(c.plan.discount == r.discount);
    CHECK(c.plan.subgoal_index == r.n_sg);
    CHECK(c.plan.search_horizon == r.n_s);
  }
  CHECK(config::presets().size() == 5);
  CHECK_THROWS_AS(config::find_preset("maze2d"), ConfigError);
}

TEST_CASE("explicit keys override the preset") {
  const auto c = config::parse_config_text(R"({"preset":"pen","graph":{"gamma_m":0.7},"plan":{"search_horizon":"inf"}})");
  CHECK(c.graph.gamma_m == 0.7);
  CHECK(c.plan.discount == 0.8);
  CHECK_FALSE(c.plan.search_horizon.has_value());
}

TEST_CASE("constraint violations name the key") {
  auto e = config_error(R"({"graph":{"gamma_m":-1}})");
  CHECK(std::string(e.what()) == "gamma_m must be > 0");
  CHECK(e.key() == "graph.gamma_m");

  e = config_error(R"({"plan":{"discount":1.0}})");
  CHECK(e.key() == "plan.discount");

  e = config_error(R"({"metric":{"batch_size":1}})");
  CHECK(e.key() == "metric.batch_size");

  e = config_error(R"({"graph":{"reward_mode":"median"}})");
  CHECK(e.key() == "graph.reward_mode");
}

TEST_CASE("unknown keys and wrong types are rejected with their full path") {
  auto e = config_error(R"({"metric":{"epoch":5}})");
  CHECK(e.key() == "metric.epoch");
  e = config_error(R"({"metric":{"epochs":"five"}})");
  CHECK(e.key() == "metric.epochs");
  e = config_error(R"({"bogus":1})");
  CHECK(e.key() == "bogus");
  CHECK_THROWS_AS(config::parse_config_text("{not json"), ParseError);
}

TEST_CASE("to_json round trips every field") {
  auto c = config::parse_config_text(R"({"preset":"door","seed":9,"env":{"name":"pointmaze-medium","goal":[1,1]},
    "collect":{"episodes":7,"max_transitions":null},"eval":{"checkpoint":"eval"}})");
  CHECK(config::parse_config_text(config::to_json(c)) == c);
  c.plan.greedy = true;
  CHECK(config::parse_config_text(config::to_json(c)) == c);
}

TEST_CASE("derived component configs follow the model seed") {
  auto c = config::parse_config_text(R"({"seed":3,"metric":{"epochs":12}})");
  CHECK(c.model_seed(2) == 5);
  CHECK(c.metric_config(5).seed == 5);
  CHECK(c.metric_config(5).epochs == 12);
  CHECK(c.translator_config(5).seed == 5);
  CHECK(c.plan_config().discount == c.plan.discount);
}

TEST_CASE("environment factory") {
  CHECK(config::make_env({"pointmaze-umaze", {}, {}, {}})->spec().state_dim == 2);
  CHECK(config::make_env({"chain", {}, {}, {}})->spec().state_dim == 1);
  CHECK_THROWS_AS(config::make_env({"pointmaze", {}, {}, {}}), ConfigError);
}

TEST_CASE("reward specs") {
  const auto l = env::builtin_layout("umaze");
  const auto path = (std::filesystem::temp_directory_path() / "vmg_test_layout.json").string();
  { std::ofstream(path) << l.to_json(); }
  const env::Vector at = l.center({1, 3});
  const env::Vector outside = at + env::Vector::Constant(2, 0.6);
  const env::Vector zero = env::Vector::Zero(2);
  for (const std::string layout : {std::string("umaze"), path}) {
    const auto r = rewards::parse_reward_spec("maze-cell:" + layout + ",1,3");
    CHECK(r(outside, zero, at) == 1.0);
    CHECK(r(at, zero, at) == 0.0);
  }
  std::filesystem::remove(path);
  CHECK(rewards::parse_reward_spec("zero")(zero, zero, zero) == 0.0);
  CHECK(rewards::parse_reward_spec("chain-goal:2")(zero.head(1), zero.head(1), env::Vector::Constant(1, 5.0)) == -3.0);
  CHECK_THROWS_AS(rewards::parse_reward_spec("maze-cell:umaze,0,0"), InvalidArgument);
  CHECK_THROWS_AS(rewards::parse_reward_spec("bogus"), InvalidArgument);
}

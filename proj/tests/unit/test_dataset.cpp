#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vmg/dataset.hpp"
#include "vmg/envs.hpp"
#include "vmg/errors.hpp"

using namespace vmg;
using data::Vector;

namespace {

Vector v2(double x, double y) { return (Vector(2) << x, y).finished(); }

data::Dataset small_dataset() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  std::vector<data::Episode> eps;
  for (int e = 0; e < 3; ++e) {
    std::vector<data::Transition> ts;
    Vector s = v2(n(rng), n(rng));
    for (int t = 0; t < 4 + e; ++t) {
      data::Transition tr;
      tr.state = s;
      tr.action = v2(n(rng), n(rng));
      tr.reward = n(rng) / 3.0;
      tr.next_state = s + 0.1 * tr.action;
      tr.terminal = (e == 1 && t == 4);
      s = tr.next_state;
      ts.push_back(tr);
    }
    eps.emplace_back(std::move(ts));
  }
  return data::Dataset(std::move(eps), 2, 2, {"toy", 9});
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("text and binary round trips are bit-exact") {
  const auto d = small_dataset();
  for (const auto* name : {"vmg_test_ds.jsonl", "vmg_test_ds.vmgd"}) {
    const auto path = temp_path(name);
    data::save(d, path);
    const auto back = data::load(path);
    std::filesystem::remove(path);
    CHECK(back == d);
    CHECK(back.metadata() == d.metadata());
  }
  CHECK(data::decode_binary(data::encode_binary(d)) == d);
}

TEST_CASE("an empty file has no episodes") {
  CHECK_THROWS_WITH_AS(data::decode_text(""), "no episodes", SchemaError);
  CHECK_THROWS_WITH_AS(data::decode_binary({}), "no episodes", SchemaError);
}

TEST_CASE("a single 2-step episode loads with chaining intact") {
  const auto d = oracle::dataset_from_chains({{v2(0, 0), v2(1, 0), v2(1, 1)}}, {{0.0, 1.0}});
  const auto back = data::decode_text(data::encode_text(d));
  CHECK(back.transition_count() == 2);
  CHECK(back.episodes()[0][0].next_state == back.episodes()[0][1].state);
}

TEST_CASE("malformed records report their line") {
  auto text = data::encode_text(small_dataset());
  // Corrupt the third line (second episode).
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{not json");
  try {
    data::decode_text(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.record() == 3);
  }
}

TEST_CASE("broken chaining and early terminals are schema errors") {
  data::Transition a{v2(0, 0), v2(0, 0), 0.0, v2(1, 0), false};
  data::Transition b{v2(2, 0), v2(0, 0), 0.0, v2(3, 0), false};
  CHECK_THROWS_AS(data::Episode({a, b}), SchemaError);
  data::Transition c{v2(1, 0), v2(0, 0), 0.0, v2(3, 0), false};
  a.terminal = true;
  CHECK_THROWS_AS(data::Episode({a, c}), SchemaError);
}

TEST_CASE("dimension mismatch across episodes is a schema error") {
  data::Episode e1({data::Transition{v2(0, 0), v2(0, 0), 0.0, v2(1, 0), false}});
  data::Episode e2({data::Transition{Vector::Zero(3), v2(0, 0), 0.0, Vector::Ones(3), false}});
  CHECK_THROWS_AS(data::Dataset({e1, e2}, 2, 2), SchemaError);
}

TEST_CASE("batch sampling") {
  const auto one = oracle::dataset_from_chains({{v2(0, 0), v2(1, 0)}}, {{0.5}});
  std::mt19937_64 rng(1);
  const auto b = data::sample_transition_batch(one, 2, rng);
  CHECK(b.size() == 2);
  CHECK(b[0] == one.transition(0));
  CHECK(b[1] == one.transition(0));
  CHECK_THROWS_AS(data::sample_transition_batch(one, 1, rng), InvalidArgument);

  const auto d = small_dataset();
  std::mt19937_64 r1(5), r2(5);
  CHECK(data::sample_transition_batch(d, 16, r1) == data::sample_transition_batch(d, 16, r2));
}

TEST_CASE("uniform draws from two transitions stay within 3 sigma") {
  const auto d = oracle::dataset_from_chains({{v2(0, 0), v2(1, 0), v2(2, 0)}}, {{0.0, 1.0}});
  std::mt19937_64 rng(123);
  const int n = 10000;
  int first = 0;
  for (int i = 0; i < n / 2; ++i) {
    for (const auto& t : data::sample_transition_batch(d, 2, rng)) first += (t.reward == 0.0);
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(first - n / 2) < 3.0 * sigma);
}

TEST_CASE("translator pairs: k is uniform on 1..K and truncates near the end") {
  std::vector<Vector> chain;
  for (int i = 0; i <= 100; ++i) chain.push_back(v2(i, 0));
  const auto d = oracle::dataset_from_chains({chain}, {});
  const auto& ep = d.episodes()[0];
  std::mt19937_64 rng(77);
  std::vector<int> hist(11, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto p = data::sample_translator_pair(ep, 0, 10, rng);
    REQUIRE(p);
    REQUIRE(p->k >= 1);
    REQUIRE(p->k <= 10);
    CHECK(p->target_state == ep.state(p->k));
    ++hist[p->k];
  }
  const double expect = n / 10.0;
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  for (int k = 1; k <= 10; ++k) CHECK(std::abs(hist[k] - expect) < 3.0 * sigma);

  // t = len - 2 leaves exactly one future state.
  for (int i = 0; i < 50; ++i) CHECK(data::sample_translator_pair(ep, 98, 10, rng)->k <= 2);
  CHECK(data::sample_translator_pair(ep, 99, 10, rng)->k == 1);
  CHECK_FALSE(data::sample_translator_pair(ep, 100, 10, rng).has_value());
}

TEST_CASE("relabel with the original rewards is the identity, zero clears rewards") {
  const auto d = small_dataset();
  // Rewards keyed by the exact (state, next_state) pair.
  auto replay = [&](const Vector& s, const Vector&, const Vector& s2) {
    for (std::size_t i = 0; i < d.transition_count(); ++i) {
      if (d.transition(i).state == s && d.transition(i).next_state == s2) return d.transition(i).reward;
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK(data::relabel_rewards(d, replay) == d);

  const auto z = data::relabel_rewards(d, [](const Vector&, const Vector&, const Vector&) { return 0.0; });
  for (std::size_t i = 0; i < d.transition_count(); ++i) {
    CHECK(z.transition(i).reward == 0.0);
    CHECK(z.transition(i).state == d.transition(i).state);
    CHECK(z.transition(i).action == d.transition(i).action);
    CHECK(z.transition(i).terminal == d.transition(i).terminal);
  }
}

TEST_CASE("relabel reports the first non-finite reward by flat index") {
  const auto d = small_dataset();
  int calls = 0;
  auto bad = [&](const Vector&, const Vector&, const Vector&) {
    return ++calls == 6 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  CHECK_THROWS_WITH_AS(data::relabel_rewards(d, bad), "relabel_rewards: non-finite reward at transition 5",
                       NumericFault);
}

TEST_CASE("new-goal indicator reward fires exactly on entries into the goal disc") {
  const auto layout = env::builtin_layout("umaze");
  env::PointMazeEnv e(layout);
  env::MazeCollectConfig cfg;
  cfg.episodes = 40;
  cfg.seed = 3;
  const auto d = env::collect_maze_dataset(e, cfg).dataset;
  const Vector center = layout.center(layout.find('S'));
  const double radius = layout.goal_radius;
  const auto relabeled = data::relabel_rewards(d, env::goal_entry_reward(center, radius));
  std::size_t positives = 0;
  for (std::size_t i = 0; i < d.transition_count(); ++i) {
    const auto& t = relabeled.transition(i);
    const bool inside_before = std::hypot(t.state(0) - center(0), t.state(1) - center(1)) <= radius;
    const bool inside_after = std::hypot(t.next_state(0) - center(0), t.next_state(1) - center(1)) <= radius;
    const double expect = (!inside_before && inside_after) ? 1.0 : 0.0;
    CHECK(t.reward == expect);
    positives += t.reward > 0.0;
  }
  CHECK(positives > 0);
}

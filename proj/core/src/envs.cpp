#include "vmg/envs.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vmg/errors.hpp"

namespace vmg::env {

namespace {

constexpr double kOverlapEps = 1e-9;

EnvSpec point_spec(const MazeLayout& layout, std::size_t max_steps) {
  EnvSpec s;
  s.name = "pointmaze-" + layout.name;
  s.state_dim = 2;
  s.action_dim = 2;
  s.action_bounds = {{-1.0, 1.0}, {-1.0, 1.0}};
  s.max_episode_steps = max_steps;
  s.reward_kind = RewardKind::sparse_goal;
  s.random_score = layout.random_score;
  s.expert_score = layout.expert_score;
  return s;
}

void require_action(const EnvSpec& spec, const Vector& action) {
  if (static_cast<std::size_t>(action.size()) != spec.action_dim) {
    throw InvalidArgument("action has dimension " + std::to_string(action.size()) + ", expected " +
                          std::to_string(spec.action_dim));
  }
  if (!action.allFinite()) throw InvalidArgument("action contains non-finite values");
}

}  // namespace

Vector clip_action(const EnvSpec& spec, const Vector& action, bool* clipped) {
  require_action(spec, action);
  Vector out = action;
  bool any = false;
  for (std::size_t i = 0; i < spec.action_dim; ++i) {
    const auto [lo, hi] = spec.action_bounds[i];
    const double v = std::clamp(action[static_cast<Eigen::Index>(i)], lo, hi);
    if (v != action[static_cast<Eigen::Index>(i)]) any = true;
    out[static_cast<Eigen::Index>(i)] = v;
  }
  if (clipped) *clipped = any;
  return out;
}

// ---------------------------------------------------------------- layout

bool MazeLayout::is_free(Cell c) const {
  if (c.row < 0 || c.row >= rows() || c.col < 0 || c.col >= cols()) return false;
  return grid[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)] != '#';
}

Cell MazeLayout::find(char marker) const {
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < cols(); ++c) {
      if (grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == marker) return {c, r};
    }
  }
  throw SchemaError(std::string("layout '") + name + "' has no '" + marker + "' cell");
}

std::vector<Cell> MazeLayout::free_cells() const {
  std::vector<Cell> out;
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < cols(); ++c) {
      if (is_free({c, r})) out.push_back({c, r});
    }
  }
  return out;
}

Vector MazeLayout::center(Cell c) const {
  Vector p(2);
  p << c.col + 0.5, (rows() - 1 - c.row) + 0.5;
  return p;
}

Cell MazeLayout::cell_of(const Vector& pos) const {
  return {static_cast<int>(std::floor(pos[0])), rows() - 1 - static_cast<int>(std::floor(pos[1]))};
}

void MazeLayout::validate() const {
  if (grid.empty()) throw SchemaError("layout '" + name + "' has an empty grid");
  const std::size_t width = grid[0].size();
  for (const auto& line : grid) {
    if (line.size() != width) throw SchemaError("layout '" + name + "' has ragged rows");
    for (char ch : line) {
      if (ch != '#' && ch != '.' && ch != 'S' && ch != 'G') {
        throw SchemaError("layout '" + name + "' has unknown cell character '" + std::string(1, ch) + "'");
      }
    }
  }
  for (int c = 0; c < cols(); ++c) {
    if (is_free({c, 0}) || is_free({c, rows() - 1})) throw SchemaError("layout '" + name + "' border is open");
  }
  for (int r = 0; r < rows(); ++r) {
    if (is_free({0, r}) || is_free({cols() - 1, r})) throw SchemaError("layout '" + name + "' border is open");
  }
  (void)find('S');
  (void)find('G');
  if (!(step_size > 0.0 && step_size <= 0.5)) throw SchemaError("step_size must be in (0, 0.5]");
  if (!(agent_radius > 0.0 && agent_radius < 0.25)) throw SchemaError("agent_radius must be in (0, 0.25)");
  if (!(goal_radius > 0.0)) throw SchemaError("goal_radius must be > 0");
  if (!(step_noise_sigma >= 0.0)) throw SchemaError("step_noise_sigma must be >= 0");
  if (!(start_jitter >= 0.0 && start_jitter + agent_radius < 0.5)) {
    throw SchemaError("start_jitter must keep the agent inside its start cell");
  }
  if (max_episode_steps == 0) throw SchemaError("max_episode_steps must be > 0");
}

std::string MazeLayout::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "vmg-maze-layout";
  j["name"] = name;
  j["version"] = version;
  j["grid"] = grid;
  j["step_size"] = step_size;
  j["agent_radius"] = agent_radius;
  j["goal_radius"] = goal_radius;
  j["step_noise_sigma"] = step_noise_sigma;
  j["start_jitter"] = start_jitter;
  j["max_episode_steps"] = max_episode_steps;
  j["random_score"] = random_score;
  j["expert_score"] = expert_score;
  return j.dump(2) + "\n";
}

MazeLayout MazeLayout::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("layout: ") + e.what(), 1);
  }
  try {
    if (j.value("format", std::string()) != "vmg-maze-layout") throw SchemaError("not a vmg-maze-layout document");
    MazeLayout l;
    l.name = j.at("name").get<std::string>();
    l.version = j.at("version").get<int>();
    l.grid = j.at("grid").get<std::vector<std::string>>();
    l.step_size = j.value("step_size", l.step_size);
    l.agent_radius = j.value("agent_radius", l.agent_radius);
    l.goal_radius = j.value("goal_radius", l.goal_radius);
    l.step_noise_sigma = j.value("step_noise_sigma", l.step_noise_sigma);
    l.start_jitter = j.value("start_jitter", l.start_jitter);
    l.max_episode_steps = j.value("max_episode_steps", l.max_episode_steps);
    l.random_score = j.value("random_score", l.random_score);
    l.expert_score = j.value("expert_score", l.expert_score);
    l.validate();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("layout: ") + e.what());
  }
}

MazeLayout MazeLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open layout file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

MazeLayout builtin_layout(std::string_view name) {
  MazeLayout l;
  l.name = std::string(name);
  if (name == "umaze") {
    l.grid = {
        "#####",
        "#G..#",
        "###.#",
        "#S..#",
        "#####",
    };
    l.max_episode_steps = 50;
    l.random_score = 0.0;
    l.expert_score = 1.0;
  } else if (name == "medium") {
    l.grid = {
        "########",
        "#S.##..#",
        "#..#...#",
        "##...###",
        "#..#...#",
        "#.#..#.#",
        "#...#.G#",
        "########",
    };
    l.max_episode_steps = 80;
    l.random_score = 0.0;
    l.expert_score = 1.0;
  } else {
    throw InvalidArgument("unknown maze layout: " + std::string(name));
  }
  l.validate();
  return l;
}

std::vector<std::string> builtin_layout_names() { return {"umaze", "medium"}; }

// ---------------------------------------------------------------- PointMaze

PointMazeEnv::PointMazeEnv(MazeLayout layout, MazeTask task)
    : layout_(std::move(layout)), terminate_on_goal_(task.terminate_on_goal) {
  layout_.validate();
  start_ = task.start.value_or(layout_.find('S'));
  goal_ = task.goal.value_or(layout_.find('G'));
  if (!layout_.is_free(start_)) throw InvalidArgument("start cell is a wall");
  if (!layout_.is_free(goal_)) throw InvalidArgument("goal cell is a wall");
  const std::size_t cap = task.max_episode_steps.value_or(layout_.max_episode_steps);
  if (cap == 0) throw InvalidArgument("max_episode_steps must be > 0");
  spec_ = point_spec(layout_, cap);
  goal_center_ = layout_.center(goal_);
  pos_ = layout_.center(start_);
}

bool PointMazeEnv::in_goal(const Vector& pos) const { return (pos - goal_center_).norm() <= layout_.goal_radius; }

bool PointMazeEnv::collision_free(const Vector& pos) const {
  const double r = layout_.agent_radius;
  const int c0 = static_cast<int>(std::floor(pos[0] - r + kOverlapEps));
  const int c1 = static_cast<int>(std::floor(pos[0] + r - kOverlapEps));
  const int y0 = static_cast<int>(std::floor(pos[1] - r + kOverlapEps));
  const int y1 = static_cast<int>(std::floor(pos[1] + r - kOverlapEps));
  for (int c = c0; c <= c1; ++c) {
    for (int y = y0; y <= y1; ++y) {
      if (!layout_.is_free({c, layout_.rows() - 1 - y})) return false;
    }
  }
  return true;
}

double PointMazeEnv::clamp_axis(const Vector& pos, int axis, double delta) const {
  Vector next = pos;
  next[axis] += delta;
  if (collision_free(next)) return next[axis];
  const double r = layout_.agent_radius;
  // Displacements are below one cell, so the only newly overlapped cells sit in the line just entered.
  if (delta > 0.0) {
    next[axis] = std::floor(next[axis] + r - kOverlapEps) - r;
  } else {
    next[axis] = std::floor(next[axis] - r + kOverlapEps) + 1.0 + r;
  }
  if (!collision_free(next)) return pos[axis];
  return next[axis];
}

Vector PointMazeEnv::move(const Vector& pos, const Vector& displacement) const {
  constexpr double kMaxDelta = 0.5;
  Vector out = pos;
  out[0] = clamp_axis(out, 0, std::clamp(displacement[0], -kMaxDelta, kMaxDelta));
  out[1] = clamp_axis(out, 1, std::clamp(displacement[1], -kMaxDelta, kMaxDelta));
  return out;
}

Vector PointMazeEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_real_distribution<double> jitter(-layout_.start_jitter, layout_.start_jitter);
  Vector p = layout_.center(start_);
  p[0] += jitter(rng_);
  p[1] += jitter(rng_);
  pos_ = p;
  steps_ = 0;
  done_ = false;
  return pos_;
}

Vector PointMazeEnv::reset_at(const Vector& position, std::uint64_t seed) {
  if (position.size() != 2 || !position.allFinite()) throw InvalidArgument("reset position must be a finite 2-vector");
  if (!collision_free(position)) throw InvalidArgument("reset position overlaps a wall");
  rng_.seed(seed);
  pos_ = position;
  steps_ = 0;
  done_ = false;
  return pos_;
}

StepResult PointMazeEnv::step(const Vector& action) {
  if (done_) throw StateError("step() called on a finished episode; call reset() first");
  StepResult res;
  const Vector a = clip_action(spec_, action, &res.clipped);
  Vector disp = layout_.step_size * a;
  if (layout_.step_noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, layout_.step_noise_sigma);
    disp[0] += noise(rng_);
    disp[1] += noise(rng_);
  }
  const Vector next = move(pos_, disp);
  res.reward = reward(pos_, a, next);
  res.success = res.reward > 0.0;
  pos_ = next;
  ++steps_;
  res.state = pos_;
  res.terminal = (res.success && terminate_on_goal_) || steps_ >= spec_.max_episode_steps;
  done_ = res.terminal;
  return res;
}

double PointMazeEnv::reward(const Vector& state, const Vector&, const Vector& next_state) const {
  return (in_goal(next_state) && !in_goal(state)) ? 1.0 : 0.0;
}

data::RewardFn goal_entry_reward(Vector center, double radius) {
  return [center = std::move(center), radius](const Vector& s, const Vector&, const Vector& s2) {
    return ((s2 - center).norm() <= radius && (s - center).norm() > radius) ? 1.0 : 0.0;
  };
}

// ---------------------------------------------------------------- Chain

ChainEnv::ChainEnv(ChainConfig config) : config_(config) {
  if (!(config_.lo < config_.hi)) throw InvalidArgument("chain bounds must satisfy lo < hi");
  if (config_.noise_sigma < 0.0) throw InvalidArgument("chain noise_sigma must be >= 0");
  if (config_.max_episode_steps == 0) throw InvalidArgument("max_episode_steps must be > 0");
  spec_.name = "chain";
  spec_.state_dim = 1;
  spec_.action_dim = 1;
  spec_.action_bounds = {{-1.0, 1.0}};
  spec_.max_episode_steps = config_.max_episode_steps;
  spec_.reward_kind = RewardKind::dense;
  spec_.random_score = config_.random_score;
  spec_.expert_score = config_.expert_score;
}

Vector ChainEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  std::uniform_real_distribution<double> jitter(-config_.start_jitter, config_.start_jitter);
  pos_ = std::clamp(config_.start + (config_.start_jitter > 0.0 ? jitter(rng_) : 0.0), config_.lo, config_.hi);
  steps_ = 0;
  done_ = false;
  return Vector::Constant(1, pos_);
}

Vector ChainEnv::reset_at(double position, std::uint64_t seed) {
  if (!std::isfinite(position) || position < config_.lo || position > config_.hi) {
    throw InvalidArgument("chain reset position outside bounds");
  }
  rng_.seed(seed);
  pos_ = position;
  steps_ = 0;
  done_ = false;
  return Vector::Constant(1, pos_);
}

StepResult ChainEnv::step(const Vector& action) {
  if (done_) throw StateError("step() called on a finished episode; call reset() first");
  StepResult res;
  const Vector a = clip_action(spec_, action, &res.clipped);
  double noise = 0.0;
  if (config_.noise_sigma > 0.0) noise = std::normal_distribution<double>(0.0, config_.noise_sigma)(rng_);
  const double next = std::clamp(pos_ + a[0] + noise, config_.lo, config_.hi);
  res.state = Vector::Constant(1, next);
  res.reward = reward(Vector::Constant(1, pos_), a, res.state);
  pos_ = next;
  ++steps_;
  res.terminal = steps_ >= spec_.max_episode_steps;
  done_ = res.terminal;
  return res;
}

double ChainEnv::reward(const Vector&, const Vector&, const Vector& next_state) const {
  return -std::abs(next_state[0] - config_.goal);
}

}  // namespace vmg::env

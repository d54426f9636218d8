#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vmg/dataset.hpp"

namespace vmg::env {

using Vector = Eigen::VectorXd;

enum class RewardKind { sparse_goal, dense };

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::pair<double, double>> action_bounds;
  std::size_t max_episode_steps = 0;
  RewardKind reward_kind = RewardKind::sparse_goal;
  // Normalized-score anchors: 100 * (score - random) / (expert - random).
  double random_score = 0.0;
  double expert_score = 1.0;
};

struct StepResult {
  Vector state;
  double reward = 0.0;
  bool terminal = false;
  bool clipped = false;  // the action was outside bounds and got clipped
  bool success = false;  // goal entered on this step
};

/// Clips each component to the spec bounds; sets *clipped when anything changed.
Vector clip_action(const EnvSpec& spec, const Vector& action, bool* clipped = nullptr);

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  /// Deterministic given seed.
  virtual Vector reset(std::uint64_t seed) = 0;
  /// Throws StateError after a terminal step or before reset.
  virtual StepResult step(const Vector& action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
  /// Reward the environment would assign to (s, a, s').
  virtual double reward(const Vector& state, const Vector& action, const Vector& next_state) const = 0;
};

// ---------------------------------------------------------------- PointMaze

struct Cell {
  int col = 0;
  int row = 0;  // row 0 is the top line of the layout text
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid maze: '#' wall, '.' free, 'S' start cell, 'G' goal cell. One unit per cell.
struct MazeLayout {
  std::string name;
  int version = 1;
  std::vector<std::string> grid;
  double step_size = 0.2;         // max displacement per axis per step
  double agent_radius = 0.1;      // half-width of the square footprint
  double goal_radius = 0.5;
  double step_noise_sigma = 0.01;
  double start_jitter = 0.1;
  std::size_t max_episode_steps = 100;
  double random_score = 0.0;
  double expert_score = 1.0;

  int rows() const { return static_cast<int>(grid.size()); }
  int cols() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }
  bool is_free(Cell c) const;
  Cell find(char marker) const;
  std::vector<Cell> free_cells() const;
  /// Continuous center of a cell; +y is north (towards row 0).
  Vector center(Cell c) const;
  Cell cell_of(const Vector& pos) const;

  /// Throws SchemaError on ragged rows, open borders, or missing S/G markers.
  void validate() const;
  std::string to_json() const;
  static MazeLayout from_json(const std::string& text);
  static MazeLayout load(const std::string& path);
};

/// Fixed, versioned layouts: "umaze" and "medium".
MazeLayout builtin_layout(std::string_view name);
std::vector<std::string> builtin_layout_names();

struct MazeTask {
  std::optional<Cell> start;  // defaults to the layout's S cell
  std::optional<Cell> goal;   // defaults to the layout's G cell
  bool terminate_on_goal = true;
  std::optional<std::size_t> max_episode_steps;  // defaults to the layout cap
};

class PointMazeEnv final : public Env {
 public:
  explicit PointMazeEnv(MazeLayout layout, MazeTask task = {});

  const EnvSpec& spec() const override { return spec_; }
  Vector reset(std::uint64_t seed) override;
  /// Resets to an explicit position (must be collision-free).
  Vector reset_at(const Vector& position, std::uint64_t seed);
  StepResult step(const Vector& action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<PointMazeEnv>(*this); }
  double reward(const Vector& state, const Vector& action, const Vector& next_state) const override;

  const MazeLayout& layout() const { return layout_; }
  Vector goal_center() const { return goal_center_; }
  double goal_radius() const { return layout_.goal_radius; }
  Cell start_cell() const { return start_; }
  Cell goal_cell() const { return goal_; }
  bool in_goal(const Vector& pos) const;
  /// True if the square footprint at `pos` touches no wall cell.
  bool collision_free(const Vector& pos) const;
  /// Deterministic part of the dynamics (no noise): per-axis move with wall clamping.
  Vector move(const Vector& pos, const Vector& displacement) const;
  const Vector& position() const { return pos_; }

 private:
  double clamp_axis(const Vector& pos, int axis, double delta) const;

  MazeLayout layout_;
  EnvSpec spec_;
  Cell start_;
  Cell goal_;
  Vector goal_center_;
  bool terminate_on_goal_;
  Vector pos_;
  std::size_t steps_ = 0;
  bool done_ = true;
  std::mt19937_64 rng_;
};

/// Sparse reward 1 exactly when (s' inside, s outside) a disc.
data::RewardFn goal_entry_reward(Vector center, double radius);

// ---------------------------------------------------------------- Chain

struct ChainConfig {
  double lo = -10.0;
  double hi = 10.0;
  double goal = 5.0;
  double noise_sigma = 0.0;
  double start = 0.0;
  double start_jitter = 0.0;
  std::size_t max_episode_steps = 100;
  // Return anchors measured on the default chain: uniform random actions, and
  // the saturated controller a = clamp(goal - s).
  double random_score = -530.0;
  double expert_score = -10.0;
};

/// 1-D drift s' = clamp(s + a + noise), dense reward -|s' - goal|.
class ChainEnv final : public Env {
 public:
  explicit ChainEnv(ChainConfig config = {});
  const EnvSpec& spec() const override { return spec_; }
  Vector reset(std::uint64_t seed) override;
  Vector reset_at(double position, std::uint64_t seed);
  StepResult step(const Vector& action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<ChainEnv>(*this); }
  double reward(const Vector& state, const Vector& action, const Vector& next_state) const override;
  const ChainConfig& config() const { return config_; }

 private:
  ChainConfig config_;
  EnvSpec spec_;
  double pos_ = 0.0;
  std::size_t steps_ = 0;
  bool done_ = true;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------- collectors

/// Noisy waypoint follower: BFS over free cells, heads for the next cell center.
struct WaypointFollowerConfig {
  double action_noise = 0.3;     // Gaussian sigma added to each action component
  double wander_prob = 0.0;      // per-step chance of starting a random-direction excursion
  std::size_t wander_steps = 8;  // length of an excursion
};

class WaypointFollower {
 public:
  WaypointFollower(const MazeLayout& layout, Cell target, Vector target_point, WaypointFollowerConfig config,
                   std::uint64_t seed);
  Vector act(const Vector& position);
  /// Noise-free heading only.
  Vector heading(const Vector& position) const;

 private:
  const MazeLayout* layout_;
  Cell target_;
  Vector target_point_;
  WaypointFollowerConfig config_;
  std::vector<int> next_hop_;  // per cell index: next cell index towards target
  std::mt19937_64 rng_;
  std::size_t wander_left_ = 0;
  Vector wander_action_;
};

enum class CollectMode {
  goal,     // every episode starts at S and heads for the task goal
  diverse,  // random start cell and random target cell per episode
};

struct MazeCollectConfig {
  CollectMode mode = CollectMode::diverse;
  std::size_t episodes = 200;
  std::optional<std::size_t> max_transitions;  // stop (truncating) once reached
  std::size_t max_episode_steps = 100;          // diverse mode episode cap
  std::uint64_t seed = 0;
  WaypointFollowerConfig follower;
};

struct CollectReport {
  data::Dataset dataset;
  double coverage = 0.0;          // fraction of free cells visited
  std::size_t episodes_reaching_target = 0;
};

CollectReport collect_maze_dataset(const PointMazeEnv& env, const MazeCollectConfig& config);

struct ChainCollectConfig {
  std::size_t episodes = 50;
  std::uint64_t seed = 0;
  double gain = 0.5;
  double action_noise = 0.3;
};

CollectReport collect_chain_dataset(const ChainEnv& env, const ChainCollectConfig& config);

}  // namespace vmg::env

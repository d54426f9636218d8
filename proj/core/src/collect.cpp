#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "vmg/envs.hpp"
#include "vmg/errors.hpp"

namespace vmg::env {

namespace {

int cell_index(const MazeLayout& layout, Cell c) { return c.row * layout.cols() + c.col; }

Cell index_cell(const MazeLayout& layout, int idx) { return {idx % layout.cols(), idx / layout.cols()}; }

}  // namespace

WaypointFollower::WaypointFollower(const MazeLayout& layout, Cell target, Vector target_point,
                                   WaypointFollowerConfig config, std::uint64_t seed)
    : layout_(&layout),
      target_(target),
      target_point_(std::move(target_point)),
      config_(config),
      rng_(seed),
      wander_action_(Vector::Zero(2)) {
  if (!layout.is_free(target)) throw InvalidArgument("waypoint target is a wall");
  if (config_.action_noise < 0.0) throw InvalidArgument("action_noise must be >= 0");
  if (config_.wander_prob < 0.0 || config_.wander_prob > 1.0) throw InvalidArgument("wander_prob must be in [0, 1]");
  const int n = layout.rows() * layout.cols();
  next_hop_.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::deque<int> queue{cell_index(layout, target)};
  dist[static_cast<std::size_t>(queue.front())] = 0;
  constexpr int dc[4] = {0, 1, 0, -1};
  constexpr int dr[4] = {-1, 0, 1, 0};
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const Cell c = index_cell(layout, cur);
    for (int k = 0; k < 4; ++k) {
      const Cell nb{c.col + dc[k], c.row + dr[k]};
      if (!layout.is_free(nb)) continue;
      const int ni = cell_index(layout, nb);
      if (dist[static_cast<std::size_t>(ni)] >= 0) continue;
      dist[static_cast<std::size_t>(ni)] = dist[static_cast<std::size_t>(cur)] + 1;
      next_hop_[static_cast<std::size_t>(ni)] = cur;
      queue.push_back(ni);
    }
  }
}

Vector WaypointFollower::heading(const Vector& position) const {
  const Cell c = layout_->cell_of(position);
  Vector waypoint = target_point_;
  if (!(c == target_) && layout_->is_free(c)) {
    const int hop = next_hop_[static_cast<std::size_t>(cell_index(*layout_, c))];
    if (hop >= 0) waypoint = layout_->center(index_cell(*layout_, hop));
  }
  Vector a = (waypoint - position) / layout_->step_size;
  const double m = a.cwiseAbs().maxCoeff();
  if (m > 1.0) a /= m;
  return a;
}

Vector WaypointFollower::act(const Vector& position) {
  if (wander_left_ > 0) {
    --wander_left_;
    return wander_action_;
  }
  if (config_.wander_prob > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < config_.wander_prob) {
    const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng_);
    wander_action_ = Vector(2);
    wander_action_ << std::cos(angle), std::sin(angle);
    wander_left_ = config_.wander_steps > 0 ? config_.wander_steps - 1 : 0;
    return wander_action_;
  }
  Vector a = heading(position);
  if (config_.action_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.action_noise);
    a[0] += noise(rng_);
    a[1] += noise(rng_);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

CollectReport collect_maze_dataset(const PointMazeEnv& env, const MazeCollectConfig& config) {
  if (config.episodes == 0) throw InvalidArgument("episodes must be > 0");
  if (config.max_transitions && *config.max_transitions == 0) throw InvalidArgument("max_transitions must be > 0");
  const MazeLayout& layout = env.layout();
  const std::vector<Cell> free = layout.free_cells();
  if (config.mode == CollectMode::diverse && free.size() < 2) throw InvalidArgument("diverse mode needs two free cells");

  std::mt19937_64 rng(config.seed);
  std::set<int> visited;
  std::vector<data::Episode> episodes;
  std::size_t total = 0;
  std::size_t reached_count = 0;
  const double margin = 0.5 - layout.agent_radius - 0.05;

  for (std::size_t e = 0; e < config.episodes; ++e) {
    if (config.max_transitions && total >= *config.max_transitions) break;
    MazeTask task;
    task.goal = env.goal_cell();
    task.terminate_on_goal = true;
    task.max_episode_steps =
        config.mode == CollectMode::goal ? env.spec().max_episode_steps : config.max_episode_steps;
    task.start = env.start_cell();

    Cell target = env.goal_cell();
    Vector target_point = env.goal_center();
    Vector start_pos;
    if (config.mode == CollectMode::diverse) {
      std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
      const Cell start = free[pick(rng)];
      do {
        target = free[pick(rng)];
      } while (target == start);
      target_point = layout.center(target);
      std::uniform_real_distribution<double> jitter(-margin, margin);
      start_pos = layout.center(start);
      start_pos[0] += jitter(rng);
      start_pos[1] += jitter(rng);
      task.start = start;
    }
    PointMazeEnv ep_env(layout, task);
    const std::uint64_t reset_seed = rng();
    Vector s = config.mode == CollectMode::diverse ? ep_env.reset_at(start_pos, reset_seed) : ep_env.reset(reset_seed);
    WaypointFollower policy(layout, target, target_point, config.follower, rng());

    std::vector<data::Transition> transitions;
    bool reached = false;
    visited.insert(cell_index(layout, layout.cell_of(s)));
    while (true) {
      const Vector a = policy.act(s);
      const StepResult res = ep_env.step(a);
      transitions.push_back({s, a, res.reward, res.state, res.terminal});
      s = res.state;
      visited.insert(cell_index(layout, layout.cell_of(s)));
      ++total;
      if (config.mode == CollectMode::goal) {
        reached = reached || res.success;
      } else if ((s - target_point).norm() < 0.2) {
        reached = true;
        break;
      }
      if (res.terminal) break;
      if (config.max_transitions && total >= *config.max_transitions) break;
    }
    if (reached) ++reached_count;
    episodes.emplace_back(std::move(transitions));
  }

  CollectReport report{data::Dataset(std::move(episodes), 2, 2, {env.spec().name, config.seed}),
                       static_cast<double>(visited.size()) / static_cast<double>(free.size()), reached_count};
  return report;
}

CollectReport collect_chain_dataset(const ChainEnv& env, const ChainCollectConfig& config) {
  if (config.episodes == 0) throw InvalidArgument("episodes must be > 0");
  const ChainConfig& cc = env.config();
  std::mt19937_64 rng(config.seed);
  std::vector<data::Episode> episodes;
  std::size_t reached = 0;
  constexpr int kBins = 20;
  std::set<int> bins;
  auto bin_of = [&](double x) {
    return std::clamp(static_cast<int>((x - cc.lo) / (cc.hi - cc.lo) * kBins), 0, kBins - 1);
  };
  for (std::size_t e = 0; e < config.episodes; ++e) {
    ChainEnv ep_env(cc);
    const double start = std::uniform_real_distribution<double>(cc.lo, cc.hi)(rng);
    Vector s = ep_env.reset_at(start, rng());
    std::normal_distribution<double> noise(0.0, config.action_noise);
    std::vector<data::Transition> transitions;
    bins.insert(bin_of(s[0]));
    while (true) {
      double u = config.gain * (cc.goal - s[0]);
      if (config.action_noise > 0.0) u += noise(rng);
      const Vector a = Vector::Constant(1, std::clamp(u, -1.0, 1.0));
      const StepResult res = ep_env.step(a);
      transitions.push_back({s, a, res.reward, res.state, res.terminal});
      s = res.state;
      bins.insert(bin_of(s[0]));
      if (res.terminal) break;
    }
    if (std::abs(s[0] - cc.goal) < 0.5) ++reached;
    episodes.emplace_back(std::move(transitions));
  }
  return {data::Dataset(std::move(episodes), 1, 1, {env.spec().name, config.seed}),
          static_cast<double>(bins.size()) / kBins, reached};
}

}  // namespace vmg::env

#pragma once

// Simulated tasks and their simulated experts: a 10x10 grid maze and a
// navigation task whose observations are a fixed smooth lifting of a 2D
// position into a higher-dimensional space.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aril/errors.hpp"
#include "aril/numerics.hpp"

namespace aril::env {

/// One environment step as stored in the replay buffer.
struct Transition {
  Vector state;
  int action = 0;
  Vector next_state;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;  // done because of the episode-length limit, not the goal
  bool expert_intervened = false;

  bool terminal() const { return done && !truncated; }
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

/// Discrete-action episodic task with a built-in simulated expert.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual int max_episode_steps() const = 0;

  /// Starts an episode from a random start; returns the first observation.
  virtual Vector reset(Rng& rng) = 0;
  virtual StepResult step(int action) = 0;
  virtual Vector observation() const = 0;

  /// Optimal discrete action for an observation. Throws OracleError when the
  /// observation does not decode to a valid state.
  virtual int expert_action(const Vector& observation) const = 0;

  /// Short stable identifier of the state behind an observation (for logs).
  virtual std::string state_id(const Vector& observation) const = 0;

  /// Deterministic evaluation start set.
  virtual std::size_t num_evaluation_starts() const = 0;
  virtual Vector reset_to_evaluation_start(std::size_t index) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

// ==========================================================================
// Maze

struct Cell {
  int x = 0;  // column, 0 = left
  int y = 0;  // row, 0 = top
  bool operator==(const Cell&) const = default;
};

enum class MazeAction : int { up = 0, down = 1, left = 2, right = 3 };
inline constexpr int kMazeActions = 4;

enum class MazeEncoding { one_hot, coordinates };

struct MazeSpec {
  int width = 10;
  int height = 10;
  std::vector<bool> walls;  // blocked cells, indexed y * width + x
  Cell goal{9, 9};
  double step_reward = -1.0;
  double goal_reward = 10.0;
  int max_episode_steps = 200;
  MazeEncoding encoding = MazeEncoding::one_hot;

  int cell_count() const { return width * height; }
  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell(int index) const { return {index % width, index / width}; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const { return walls[static_cast<std::size_t>(index(c))]; }
  bool is_free(Cell c) const { return in_bounds(c) && !is_wall(c); }
};

inline Cell apply_move(Cell c, int action) {
  switch (action) {
    case 0: return {c.x, c.y - 1};
    case 1: return {c.x, c.y + 1};
    case 2: return {c.x - 1, c.y};
    case 3: return {c.x + 1, c.y};
    default: throw std::invalid_argument("invalid maze action " + std::to_string(action));
  }
}

/// Shortest-path step counts to the goal; -1 for walls and unreachable cells.
inline std::vector<int> bfs_distances(const MazeSpec& m) {
  std::vector<int> dist(static_cast<std::size_t>(m.cell_count()), -1);
  if (!m.is_free(m.goal)) return dist;
  std::deque<Cell> frontier{m.goal};
  dist[static_cast<std::size_t>(m.index(m.goal))] = 0;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (int a = 0; a < kMazeActions; ++a) {
      const Cell n = apply_move(c, a);  // moves are reversible, so BFS from the goal works
      if (!m.is_free(n)) continue;
      auto& d = dist[static_cast<std::size_t>(m.index(n))];
      if (d >= 0) continue;
      d = dist[static_cast<std::size_t>(m.index(c))] + 1;
      frontier.push_back(n);
    }
  }
  return dist;
}

/// Procedurally places walls with the given density, then walls off any free
/// pocket that cannot reach the goal. Fully determined by the seed.
inline MazeSpec generate_maze(std::uint64_t seed, double wall_density = 0.2) {
  MazeSpec m;
  m.walls.assign(static_cast<std::size_t>(m.cell_count()), false);
  Rng rng(seed);
  std::bernoulli_distribution wall(wall_density);
  for (int i = 0; i < m.cell_count(); ++i) {
    const Cell c = m.cell(i);
    if (c == m.goal) continue;
    m.walls[static_cast<std::size_t>(i)] = wall(rng);
  }
  const auto dist = bfs_distances(m);
  for (int i = 0; i < m.cell_count(); ++i)
    if (dist[static_cast<std::size_t>(i)] < 0) m.walls[static_cast<std::size_t>(i)] = true;
  return m;
}

/// Text grid: one row per line, '.' free, '#' wall, 'G' goal.
inline std::string serialize_layout(const MazeSpec& m) {
  std::string out;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const Cell c{x, y};
      out += c == m.goal ? 'G' : (m.is_wall(c) ? '#' : '.');
    }
    out += '\n';
  }
  return out;
}

inline MazeSpec parse_layout(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("maze layout is empty");
  MazeSpec m;
  m.height = static_cast<int>(rows.size());
  m.width = static_cast<int>(rows.front().size());
  m.walls.assign(static_cast<std::size_t>(m.cell_count()), false);
  bool have_goal = false;
  for (int y = 0; y < m.height; ++y) {
    if (static_cast<int>(rows[static_cast<std::size_t>(y)].size()) != m.width)
      throw std::invalid_argument("maze layout rows have unequal length");
    for (int x = 0; x < m.width; ++x) {
      const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      if (ch == '#') {
        m.walls[static_cast<std::size_t>(m.index({x, y}))] = true;
      } else if (ch == 'G') {
        if (have_goal) throw std::invalid_argument("maze layout has more than one goal");
        m.goal = {x, y};
        have_goal = true;
      } else if (ch != '.') {
        throw std::invalid_argument(std::string("maze layout has unknown character '") + ch + "'");
      }
    }
  }
  if (!have_goal) throw std::invalid_argument("maze layout has no goal");
  return m;
}

struct MazeStep {
  Cell next;
  double reward = 0.0;
  bool done = false;
};

/// Applies one move. Moves into walls or off the grid leave the agent in place.
/// The episode-length limit is enforced by MazeEnv, not here.
inline MazeStep maze_step(const MazeSpec& m, Cell c, int action) {
  if (action < 0 || action >= kMazeActions)
    throw std::invalid_argument("invalid maze action " + std::to_string(action));
  if (!m.is_free(c) || c == m.goal) throw std::invalid_argument("maze_step from a wall or goal cell");
  Cell n = apply_move(c, action);
  if (!m.is_free(n)) n = c;
  if (n == m.goal) return {n, m.goal_reward, true};
  return {n, m.step_reward, false};
}

inline Vector maze_observe(const MazeSpec& m, Cell c) {
  if (!m.in_bounds(c)) throw std::invalid_argument("maze_observe: cell out of bounds");
  if (m.encoding == MazeEncoding::one_hot)
    return one_hot(static_cast<std::size_t>(m.cell_count()), static_cast<std::size_t>(m.index(c)));
  Vector v(2);
  v << static_cast<double>(c.x) / (m.width - 1), static_cast<double>(c.y) / (m.height - 1);
  return v;
}

inline std::size_t maze_observation_dim(const MazeSpec& m) {
  return m.encoding == MazeEncoding::one_hot ? static_cast<std::size_t>(m.cell_count()) : 2;
}

/// Inverse of maze_observe. Throws OracleError for observations that are not
/// a valid encoding of an in-bounds cell.
inline Cell maze_decode(const MazeSpec& m, const Vector& obs) {
  if (static_cast<std::size_t>(obs.size()) != maze_observation_dim(m))
    throw OracleError("maze observation has wrong dimension");
  Cell c;
  if (m.encoding == MazeEncoding::one_hot) {
    Eigen::Index idx = 0;
    const double peak = obs.maxCoeff(&idx);
    if (std::abs(peak - 1.0) > 1e-9 || std::abs(obs.sum() - 1.0) > 1e-9)
      throw OracleError("maze observation is not one-hot");
    c = m.cell(static_cast<int>(idx));
  } else {
    c = {static_cast<int>(std::lround(obs(0) * (m.width - 1))),
         static_cast<int>(std::lround(obs(1) * (m.height - 1)))};
  }
  if (!m.in_bounds(c)) throw OracleError("maze observation decodes out of bounds");
  return c;
}

/// Undiscounted value iteration on the maze rewards: V(s) is the best
/// achievable return from s (V(goal) = 0). Unreachable cells get -inf.
inline std::vector<double> maze_value_iteration(const MazeSpec& m) {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> v(static_cast<std::size_t>(m.cell_count()), ninf);
  v[static_cast<std::size_t>(m.index(m.goal))] = 0.0;
  for (int sweep = 0; sweep < m.cell_count() + 1; ++sweep) {
    bool changed = false;
    for (int i = 0; i < m.cell_count(); ++i) {
      const Cell c = m.cell(i);
      if (!m.is_free(c) || c == m.goal) continue;
      double best = ninf;
      for (int a = 0; a < kMazeActions; ++a) {
        const MazeStep s = maze_step(m, c, a);
        const double next = s.done ? 0.0 : v[static_cast<std::size_t>(m.index(s.next))];
        if (next == ninf) continue;
        best = std::max(best, s.reward + next);
      }
      if (best > v[static_cast<std::size_t>(i)]) {
        v[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return v;
}

/// Expert return from a start cell under the maze rewards: the final step
/// earns the goal reward, every earlier step the step reward.
inline double expert_return_from_distance(const MazeSpec& m, int shortest_path_length) {
  return m.goal_reward + m.step_reward * (shortest_path_length - 1);
}

/// Free non-goal cells in index order.
inline std::vector<Cell> maze_start_cells(const MazeSpec& m) {
  std::vector<Cell> out;
  for (int i = 0; i < m.cell_count(); ++i) {
    const Cell c = m.cell(i);
    if (m.is_free(c) && !(c == m.goal)) out.push_back(c);
  }
  return out;
}

class MazeEnv final : public Environment {
 public:
  explicit MazeEnv(MazeSpec spec)
      : spec_(std::move(spec)), value_(maze_value_iteration(spec_)), starts_(maze_start_cells(spec_)) {
    for (const Cell c : starts_)
      if (!std::isfinite(value_[static_cast<std::size_t>(spec_.index(c))]))
        throw std::invalid_argument("maze has a free cell that cannot reach the goal");
    if (starts_.empty()) throw std::invalid_argument("maze has no start cells");
    cell_ = starts_.front();
  }

  const MazeSpec& spec() const { return spec_; }
  Cell cell() const { return cell_; }
  const std::vector<Cell>& start_cells() const { return starts_; }

  std::size_t observation_dim() const override { return maze_observation_dim(spec_); }
  std::size_t num_actions() const override { return kMazeActions; }
  int max_episode_steps() const override { return spec_.max_episode_steps; }

  Vector reset(Rng& rng) override {
    std::uniform_int_distribution<std::size_t> pick(0, starts_.size() - 1);
    return reset_to(starts_[pick(rng)]);
  }

  Vector reset_to(Cell c) {
    if (!spec_.is_free(c) || c == spec_.goal) throw std::invalid_argument("reset_to: not a start cell");
    cell_ = c;
    steps_ = 0;
    return observation();
  }

  StepResult step(int action) override {
    const MazeStep s = maze_step(spec_, cell_, action);
    cell_ = s.next;
    ++steps_;
    StepResult r{observation(), s.reward, s.done, false};
    if (!r.done && steps_ >= spec_.max_episode_steps) r.done = r.truncated = true;
    return r;
  }

  Vector observation() const override { return maze_observe(spec_, cell_); }

  /// Value-iteration argmax; ties resolved in the order up, down, left, right.
  int expert_action(const Vector& obs) const override { return expert_action_at(maze_decode(spec_, obs)); }

  int expert_action_at(Cell c) const {
    if (!spec_.is_free(c) || c == spec_.goal) throw OracleError("no expert action for a wall or goal cell");
    int best_action = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kMazeActions; ++a) {
      const MazeStep s = maze_step(spec_, c, a);
      const double q = s.reward + (s.done ? 0.0 : value_[static_cast<std::size_t>(spec_.index(s.next))]);
      if (q > best) {
        best = q;
        best_action = a;
      }
    }
    if (best_action < 0 || !std::isfinite(best)) throw OracleError("goal unreachable from cell");
    return best_action;
  }

  std::string state_id(const Vector& obs) const override {
    return std::to_string(spec_.index(maze_decode(spec_, obs)));
  }

  std::size_t num_evaluation_starts() const override { return starts_.size(); }
  Vector reset_to_evaluation_start(std::size_t index) override { return reset_to(starts_.at(index)); }

  /// Mean expert return over all evaluation starts.
  double expert_mean_return() const {
    const auto dist = bfs_distances(spec_);
    double total = 0.0;
    for (const Cell c : starts_)
      total += expert_return_from_distance(spec_, dist[static_cast<std::size_t>(spec_.index(c))]);
    return total / static_cast<double>(starts_.size());
  }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<MazeEnv>(*this); }

 private:
  MazeSpec spec_;
  std::vector<double> value_;
  std::vector<Cell> starts_;
  Cell cell_;
  int steps_ = 0;
};

// ==========================================================================
// Lifted navigation

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct LiftedNavSpec {
  std::size_t observation_dim = 32;
  Matrix lift_weight;  // observation_dim x 2
  Vector lift_bias;    // observation_dim
  Point2 goal{0.85, 0.85};
  double goal_radius = 0.1;
  double max_step = 0.1;
  double step_reward = -1.0;
  double goal_reward = 10.0;
  int max_episode_steps = 100;
  bool continuous_actions = false;
};

/// Lifting map obs = sin(W p + b) with W ~ N(0, 2^2), b ~ U[0, 2 pi).
inline LiftedNavSpec make_lifted_nav(std::size_t observation_dim, std::uint64_t seed) {
  LiftedNavSpec s;
  s.observation_dim = observation_dim;
  Rng rng(seed);
  s.lift_weight = gaussian_matrix(static_cast<Eigen::Index>(observation_dim), 2, rng, 0.0, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  s.lift_bias.resize(static_cast<Eigen::Index>(observation_dim));
  for (Eigen::Index i = 0; i < s.lift_bias.size(); ++i) s.lift_bias(i) = phase(rng);
  return s;
}

inline Vector lift_observation(const LiftedNavSpec& s, Point2 p) {
  Eigen::Vector2d q(p.x, p.y);
  return (s.lift_weight * q + s.lift_bias).array().sin().matrix();
}

/// Recovers the underlying position by nearest grid point followed by
/// Gauss-Newton refinement. Throws OracleError when no position in the unit
/// square reproduces the observation.
inline Point2 decode_position(const LiftedNavSpec& s, const Vector& obs) {
  if (static_cast<std::size_t>(obs.size()) != s.observation_dim)
    throw OracleError("lifted observation has wrong dimension");
  constexpr int kGrid = 50;
  Eigen::Vector2d best(0.0, 0.0);
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const Point2 p{i / double(kGrid - 1), j / double(kGrid - 1)};
      const double e = (lift_observation(s, p) - obs).squaredNorm();
      if (e < best_err) {
        best_err = e;
        best = {p.x, p.y};
      }
    }
  }
  for (int it = 0; it < 30; ++it) {
    const Vector arg = s.lift_weight * best + s.lift_bias;
    const Vector r = arg.array().sin().matrix() - obs;
    const Matrix jac = arg.array().cos().matrix().asDiagonal() * s.lift_weight;
    const Eigen::Matrix2d jtj = jac.transpose() * jac + 1e-12 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d delta = jtj.ldlt().solve(jac.transpose() * r);
    best -= delta;
    if (delta.norm() < 1e-14) break;
  }
  const double residual = (lift_observation(s, {best(0), best(1)}) - obs).norm();
  if (!(residual < 1e-6) || best.minCoeff() < -1e-6 || best.maxCoeff() > 1.0 + 1e-6)
    throw OracleError("lifted observation does not decode to a position");
  return {std::clamp(best(0), 0.0, 1.0), std::clamp(best(1), 0.0, 1.0)};
}

/// Proportional controller toward the goal, clipped to the max step norm.
inline Eigen::Vector2d expert_displacement(const LiftedNavSpec& s, Point2 p) {
  Eigen::Vector2d d(s.goal.x - p.x, s.goal.y - p.y);
  const double n = d.norm();
  if (n > s.max_step) d *= s.max_step / n;
  return d;
}

inline constexpr int kCompassActions = 8;

/// Unit direction of compass action k: angle k * 45 degrees (0 = +x).
inline Eigen::Vector2d compass_direction(int k) {
  const double angle = k * std::numbers::pi / 4.0;
  return {std::cos(angle), std::sin(angle)};
}

/// Compass action with the largest cosine to `d`; ties go to the lower index.
inline int nearest_compass_action(const Eigen::Vector2d& d) {
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kCompassActions; ++k) {
    const double dot = compass_direction(k).dot(d);
    if (dot > best_dot + 1e-12) {
      best_dot = dot;
      best = k;
    }
  }
  return best;
}

class LiftedNavEnv final : public Environment {
 public:
  explicit LiftedNavEnv(LiftedNavSpec spec) : spec_(std::move(spec)) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) eval_starts_.push_back({0.05 + 0.2 * i, 0.05 + 0.2 * j});
    std::erase_if(eval_starts_, [&](Point2 p) { return at_goal(p); });
  }

  const LiftedNavSpec& spec() const { return spec_; }
  Point2 position() const { return pos_; }

  std::size_t observation_dim() const override { return spec_.observation_dim; }
  std::size_t num_actions() const override { return kCompassActions; }
  int max_episode_steps() const override { return spec_.max_episode_steps; }

  bool at_goal(Point2 p) const { return std::hypot(p.x - spec_.goal.x, p.y - spec_.goal.y) <= spec_.goal_radius; }

  Vector reset(Rng& rng) override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Point2 p;
    do {
      p = {u(rng), u(rng)};
    } while (at_goal(p));
    return reset_to(p);
  }

  Vector reset_to(Point2 p) {
    pos_ = p;
    steps_ = 0;
    return observation();
  }

  StepResult step(int action) override {
    if (action < 0 || action >= kCompassActions)
      throw std::invalid_argument("invalid compass action " + std::to_string(action));
    return step_continuous(spec_.max_step * compass_direction(action));
  }

  /// Displacement action, clipped to the max step norm.
  StepResult step_continuous(Eigen::Vector2d d) {
    const double n = d.norm();
    if (n > spec_.max_step) d *= spec_.max_step / n;
    pos_ = {std::clamp(pos_.x + d(0), 0.0, 1.0), std::clamp(pos_.y + d(1), 0.0, 1.0)};
    ++steps_;
    StepResult r;
    r.observation = observation();
    if (at_goal(pos_)) {
      r.reward = spec_.goal_reward;
      r.done = true;
    } else {
      r.reward = spec_.step_reward;
      if (steps_ >= spec_.max_episode_steps) r.done = r.truncated = true;
    }
    return r;
  }

  Vector observation() const override { return lift_observation(spec_, pos_); }

  int expert_action(const Vector& obs) const override {
    return nearest_compass_action(expert_displacement(spec_, decode_position(spec_, obs)));
  }

  Eigen::Vector2d expert_continuous_action(const Vector& obs) const {
    return expert_displacement(spec_, decode_position(spec_, obs));
  }

  std::string state_id(const Vector& obs) const override {
    const Point2 p = decode_position(spec_, obs);
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(4);
    os << std::fixed << p.x << ':' << p.y;
    return os.str();
  }

  std::size_t num_evaluation_starts() const override { return eval_starts_.size(); }
  Vector reset_to_evaluation_start(std::size_t index) override { return reset_to(eval_starts_.at(index)); }

  std::unique_ptr<Environment> clone() const override { return std::make_unique<LiftedNavEnv>(*this); }

 private:
  LiftedNavSpec spec_;
  std::vector<Point2> eval_starts_;
  Point2 pos_;
  int steps_ = 0;
};

// ==========================================================================
// Expert oracle

/// Counting wrapper around an environment's simulated expert. Every call is a
/// paid query.
class ExpertOracle {
 public:
  explicit ExpertOracle(const Environment& env) : env_(&env) {}

  int query(const Vector& observation) {
    const int a = env_->expert_action(observation);
    ++calls_;
    return a;
  }

  std::size_t calls() const { return calls_; }

 private:
  const Environment* env_;
  std::size_t calls_ = 0;
};

/// Expert demonstrations from random starts; not charged to any query budget.
inline std::vector<Transition> rollout_expert(Environment& env, std::size_t n_episodes, Rng& rng) {
  std::vector<Transition> out;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Vector s = env.reset(rng);
    for (int t = 0; t < env.max_episode_steps(); ++t) {
      const int a = env.expert_action(s);
      const StepResult r = env.step(a);
      out.push_back({s, a, r.observation, r.reward, r.done, r.truncated, true});
      s = r.observation;
      if (r.done) break;
    }
  }
  return out;
}

}  // namespace aril::env

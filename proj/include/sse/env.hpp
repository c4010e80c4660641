#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sse/geometry.hpp"

namespace sse {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { single_goal, key_chest, double_key_chest, double_goal };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);

/// Task points in flag-bit order:
///   single_goal      {goal}
///   key_chest        {key, goal}
///   double_key_chest {key1, key2, goal}
///   double_goal      {goal1, goal2}
struct Task {
  TaskKind kind = TaskKind::single_goal;
  std::vector<GoalPoint> points;

  /// Points the high-level policy may pick as "the goal" (the chest for key
  /// tasks, both goals for double_goal).
  std::vector<GoalPoint> goal_points() const;
  std::uint32_t complete_mask() const { return (1u << points.size()) - 1u; }
};

struct SlipZone {
  Box area;
  double stick_probability = 0.0;

  friend bool operator==(const SlipZone&, const SlipZone&) = default;
};

struct EnvConfig {
  std::string name;
  Box bounds;
  std::vector<Box> walls;
  std::vector<SlipZone> slip_zones;
  GoalPoint start;
  Task task;
  int horizon = 600;
  double success_threshold = 2.0;
  double max_action = 1.0;

  bool free(GoalPoint p) const { return bounds.contains(p) && !inside_any(walls, p); }
  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
};

struct EnvState {
  GoalPoint position;
  int t = 0;
  std::uint32_t flags = 0;  // one bit per task point, set on a qualifying touch
  bool stuck_in_slip = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepInfo {
  bool reached_key = false;
  bool reached_goal = false;
};

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
  bool task_complete = false;
  StepInfo info;
};

EnvState reset(const EnvConfig& config);

/// Task flags after standing at `position`, honouring prerequisites
/// (goal needs every key; key2 needs key1).
std::uint32_t advance_flags(std::uint32_t flags, GoalPoint position, const EnvConfig& config);

/// Sparse reward implied by the flag transition before -> after.
double reward_of(const EnvState& before, const EnvState& after, const EnvConfig& config);

/// One point-mass step: axis-separated wall sliding, slip zones that can stick
/// the agent for the rest of the episode, task flags and rewards.
/// Throws std::invalid_argument for NaN or over-limit actions, std::logic_error
/// when called on a finished episode.
StepResult step(const EnvState& state, Action action, const EnvConfig& config, Rng& rng);

inline GoalPoint phi(const EnvState& state) { return state.position; }

std::vector<std::string> builtin_env_names();
EnvConfig builtin_env(std::string_view name);

/// Declarative maze text (see README for the format). `origin` prefixes
/// error messages.
EnvConfig parse_env_text(std::string_view text, const std::string& origin = "<env>");
EnvConfig load_env_file(const std::string& path);
std::string env_to_text(const EnvConfig& config);

/// Value wrapper bundling a config, a state and the slip RNG stream.
class Environment {
 public:
  Environment(EnvConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
    state_ = sse::reset(config_);
  }
  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  Rng& rng() { return rng_; }
  void reset() { state_ = sse::reset(config_); }
  StepResult step(Action a) {
    StepResult r = sse::step(state_, a, config_, rng_);
    state_ = r.next_state;
    return r;
  }

 private:
  EnvConfig config_;
  EnvState state_;
  Rng rng_;
};

}  // namespace sse

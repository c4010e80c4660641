#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sse/geometry.hpp"
#include "sse/twin_table.hpp"

namespace sse {

/// Stay plus the eight compass directions, in units of max_action.
inline constexpr std::array<Action, 9> kUnitActions = {{
    {0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
}};
inline constexpr int kActionCount = static_cast<int>(kUnitActions.size());

/// -1 until the waypoint is within `radius` (strictly), then 0.
double low_reward(GoalPoint next_position, GoalPoint waypoint, double radius = 0.5);

struct LowConfig {
  double gamma = 0.99;
  double learning_rate = 0.5;
  double tau = 0.005;
  double cell_size = 1.0;
  int max_offset = 3;  // relative waypoint offsets clipped to +-max_offset cells
  double waypoint_radius = 0.5;
  double max_action = 1.0;
  int horizon = 600;
  bool twin = true;
  bool relabel = true;  // one hindsight waypoint per sampled transition
};

struct LowTransition {
  std::uint32_t state_key = 0;
  std::uint32_t next_key = 0;
  GoalPoint position;
  GoalPoint next_position;
  GoalPoint waypoint;
  std::uint8_t action = 0;
  float reward = -1.0f;
  bool done = false;
};

/// Goal-conditioned tabular low-level learner.
///
/// Keys are (state cell, waypoint offset in cells); the policy is the argmax
/// over the nine discrete actions. A second, shared table keyed by the offset
/// alone learns from every transition. An entry of the per-cell table that
/// has never been trained reads through to the shared table, so rarely
/// departed cells (such as those next to a goal) still act sensibly. Entries
/// never trained in either table hold the horizon floor
/// -(1-gamma^H)/(1-gamma), so unexplored edges look expensive to the planner.
class LowLearner {
 public:
  LowLearner() = default;
  LowLearner(Box bounds, LowConfig config);

  const LowConfig& config() const { return config_; }
  double floor_value() const { return floor_; }
  int cell_count() const { return cols_ * rows_; }
  int offsets_per_axis() const { return 2 * config_.max_offset + 1; }

  std::uint32_t key(GoalPoint position, GoalPoint waypoint) const;
  /// Nearest state-cell center. Cells are centered on the lattice
  /// bounds.min + i * cell_size, so wall-clipped positions a hair off a
  /// lattice point share its key.
  GoalPoint snap(GoalPoint p) const;
  /// The offset from position to waypoint fits the key without clipping.
  bool within_key_range(GoalPoint position, GoalPoint waypoint) const;
  Action action_vector(int index) const;

  /// Greedy action index, ties broken uniformly at random. With noise > 0 the
  /// action vector is perturbed by N(0, noise^2) per axis and snapped to the
  /// nearest discrete action.
  int act(GoalPoint position, GoalPoint waypoint, double noise, Rng& rng) const;

  /// max_a of the twin-mean estimate at key(from, to).
  double q_value(GoalPoint from, GoalPoint to) const;
  /// Twin-mean estimate, per-cell when trained, else shared.
  double value(std::uint32_t key, int action) const;
  /// Settles the per-cell entry (online and target) at `v`.
  void set_value(std::uint32_t key, int action, double v);
  bool trained(std::uint32_t key, int action) const { return (trained_[key] >> action) & 1u; }
  /// Shared-table row of a key.
  std::uint32_t offset_row(std::uint32_t key) const { return key % static_cast<std::uint32_t>(offsets_per_axis() * offsets_per_axis()); }

  LowTransition make_transition(GoalPoint position, GoalPoint waypoint, int action,
                                GoalPoint next_position) const;

  /// One TD(0) step per transition (and per relabelled copy), then one Polyak
  /// tick of the target tables. `rng` drives relabel offsets only.
  void update(std::span<const LowTransition> batch, Rng& rng);

  /// TD target for a transition under the current target tables, bootstrapping
  /// from the per-cell view (or from the shared table alone).
  double td_target(float reward, bool done, std::uint32_t next_key, bool shared_only = false) const;

  const TwinQTable& table() const { return table_; }
  const TwinQTable& shared_table() const { return shared_; }

  void write(std::ostream& out) const;
  void read(std::istream& in);

 private:
  int cell_index(GoalPoint p) const;
  int greedy_action(std::uint32_t key, bool shared_only) const;
  double target_of(std::uint32_t key, int action, int twin, bool shared_only) const;
  double target_min_of(std::uint32_t key, int action, bool shared_only) const;

  Box bounds_{};
  LowConfig config_{};
  int cols_ = 0;
  int rows_ = 0;
  double floor_ = 0.0;
  TwinQTable table_;
  TwinQTable shared_;
  std::vector<std::uint16_t> trained_;  // per key, one bit per action
};

}  // namespace sse

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sse/env.hpp"
#include "sse/goal_space.hpp"
#include "sse/landmark_graph.hpp"
#include "sse/low_level.hpp"
#include "sse/twin_table.hpp"

namespace sse {

/// Environment state as seen by the high level: goal-space cell, episode
/// progress and task flags. The terminal marker has step == horizon.
struct AugmentedState {
  int cell = 0;
  int step = 0;
  int horizon = 1;
  std::uint32_t flags = 0;

  double time_fraction() const { return static_cast<double>(step) / horizon; }
  bool at_horizon() const { return step >= horizon; }

  friend bool operator==(const AugmentedState&, const AugmentedState&) = default;
};

AugmentedState augment(const EnvState& state, const GridPartition& partition, int horizon);

enum class SubgoalSource : std::uint8_t { goal, greedy, random, novel };

struct SubgoalChoice {
  GoalPoint point;
  int column = 0;  // Q^h candidate index (nearest candidate for off-lattice points)
  SubgoalSource source = SubgoalSource::greedy;
};

struct HighTransition {
  AugmentedState state;
  GoalPoint goal;
  GoalPoint subgoal;
  int action = 0;  // Q^h column
  double reward = 0.0;
  AugmentedState next_state;
  bool success = false;
  bool terminal = false;  // no bootstrap from next_state
  bool hindsight = false;
};

struct HighConfig {
  double gamma = 0.4;
  double learning_rate = 0.2;
  double tau = 0.005;
  bool twin = true;
  int time_buckets = 10;
  double epsilon_min = 0.1;
};

/// Branch weights of the exploration mixture (goal, greedy, novel).
struct ExploreWeights {
  double goal = 1.0;
  double greedy = 1.0;
  double novel = 1.0;

  bool any() const { return goal + greedy + novel > 0.0; }
};

/// Uniform point of the free space (rejection sampling over the bounds).
GoalPoint uniform_free_point(const EnvConfig& env, Rng& rng);

/// Goal the agent is currently pursuing: the first unreached goal point.
GoalPoint current_goal(const Task& task, std::uint32_t flags);

/// Tabular Q^h over (augmented-state key, candidate subgoal). Candidates are
/// the landmark nodes followed by the task's goal points. Rows are created on
/// first write; unseen rows read as zero.
class HighPolicy {
 public:
  HighPolicy() = default;
  HighPolicy(std::vector<GoalPoint> candidates, int goal_columns, HighConfig config);

  const HighConfig& config() const { return config_; }
  const std::vector<GoalPoint>& candidates() const { return candidates_; }
  int column_count() const { return static_cast<int>(candidates_.size()); }
  /// Column of the i-th task goal point.
  int goal_column(int i) const { return column_count() - goal_columns_ + i; }
  int goal_columns() const { return goal_columns_; }
  int nearest_column(GoalPoint p) const;

  std::uint64_t key(const AugmentedState& s) const;
  double value(const AugmentedState& s, int column) const;
  double target_value(const AugmentedState& s, int column) const;
  /// Settles an entry (online and target) at `v`, creating the row.
  void set_value(const AugmentedState& s, int column, double v);
  std::size_t row_count() const { return rows_.size(); }

  /// argmax column, ties broken uniformly at random.
  int greedy(const AugmentedState& s, Rng& rng) const;

  /// epsilon-greedy: greedy column with probability 1 - epsilon, otherwise a
  /// uniform free-space point.
  SubgoalChoice select_subgoal_h(const AugmentedState& s, double epsilon, const EnvConfig& env,
                                 Rng& rng) const;

  /// Exploration mixture over the final goal, the greedy subgoal and a point
  /// of the least-visited cell, weighted by `weights`.
  SubgoalChoice select_subgoal_exp(const AugmentedState& s, GoalPoint goal, const ExploreWeights& weights,
                                   const GridPartition& partition, const EnvConfig& env, Rng& rng) const;

  double td_target(const HighTransition& t) const;
  void update(std::span<const HighTransition> batch);

  /// Largest online value in the table (0 when empty).
  double max_value() const;

  void write(std::ostream& out) const;
  void read(std::istream& in);

 private:
  std::optional<std::size_t> row_of(const AugmentedState& s) const;
  std::size_t ensure_row(const AugmentedState& s);
  int argmax_lowest(std::size_t row) const;

  HighConfig config_{};
  std::vector<GoalPoint> candidates_;
  int goal_columns_ = 0;
  std::unordered_map<std::uint64_t, std::size_t> rows_;
  TwinQTable table_;
};

/// max pairwise distance of `positions` < epsilon, once at least `window`
/// positions are available (only the last `window` count).
bool stuck_check(std::span<const GoalPoint> positions, std::size_t window, double motion_epsilon);

/// Incremental form of stuck_check over a stream of positions. Keeps the
/// longest suffix whose points are pairwise closer than epsilon.
class StuckDetector {
 public:
  explicit StuckDetector(std::size_t window = 500, double motion_epsilon = 0.05)
      : window_(window), epsilon_(motion_epsilon) {}
  /// Records a position; returns true once the detector fires.
  bool push(GoalPoint p);
  bool fired() const { return run_.size() >= window_; }
  void reset() { run_.clear(); }

 private:
  std::size_t window_;
  double epsilon_;
  std::vector<GoalPoint> run_;
};

inline int next_decision_time(int t_prev, int k_prev) { return t_prev + k_prev; }

struct ExecutionParams {
  double lambda = 2.0;
  double c_dist = 5.0;
  EdgeCostParams cost;
  double low_noise = 0.0;
  std::size_t stuck_window = 500;
  double motion_epsilon = 0.05;
  int fixed_steps = 0;        // > 0 selects fixed-step scheduling without strict termination
  int max_decisions = 100;    // per episode, strict mode
};

/// Read-only snapshot used for one episode.
struct ExecutionContext {
  const EnvConfig& env;
  const LandmarkGraph& graph;
  const GridPartition& partition;
  const LowLearner& low;
  const HighPolicy& high;
  ExecutionParams params;
};

struct TrajectoryPoint {
  int t = 0;
  GoalPoint position;
  double reward = 0.0;
  std::uint32_t flags = 0;
};

/// Per-step sinks filled during a rollout; any pointer may be null.
struct RolloutSinks {
  std::vector<LowTransition>* low = nullptr;
  std::vector<TrajectoryPoint>* trajectory = nullptr;
  std::vector<int>* visited_cells = nullptr;
};

struct DecisionOutcome {
  HighTransition transition;
  std::optional<HighTransition> hindsight;
  bool episode_continues = false;
  bool failed = false;
  int steps = 0;
  double reward_sum = 0.0;  // env reward collected during the decision
  WaypointPath path;
};

/// Plans to the subgoal and rolls the low level out until the subgoal is
/// within lambda (success, the episode goes on), or the horizon or the stuck
/// detector ends the episode (failure: zero reward, terminal next state, and
/// a hindsight success toward the last reached waypoint when there is one).
/// With fixed_steps > 0 the rollout instead lasts exactly that many steps.
DecisionOutcome execute_subgoal(const ExecutionContext& ctx, EnvState& state, const SubgoalChoice& choice,
                                StuckDetector& stuck, Rng& env_rng, Rng& rng, const RolloutSinks& sinks);

/// Raw edge cost from the low-level values, as used by the planner.
RawCostFn low_level_costs(const LowLearner& low, const EdgeCostParams& params);

enum class Behavior : std::uint8_t { exploration, high_level };

struct DecisionRecord {
  int index = 0;
  AugmentedState state;
  SubgoalChoice choice;
  std::size_t path_length = 0;
  bool fallback = false;
  int steps = 0;
  bool success = false;
  double reward = 0.0;
  std::vector<GoalPoint> waypoints;
};

struct EpisodeResult {
  Behavior behavior = Behavior::high_level;
  std::vector<HighTransition> transitions;  // one per decision
  std::vector<HighTransition> hindsight;
  std::vector<LowTransition> low;
  std::vector<int> visited_cells;           // partition cells, one entry per step (with repeats)
  std::optional<std::pair<GoalPoint, GoalPoint>> failure;  // (terminal position, subgoal)
  std::vector<DecisionRecord> decisions;
  std::vector<TrajectoryPoint> trajectory;
  bool task_complete = false;
  bool truncated = false;  // decision cap hit
  double env_reward = 0.0;
  double forfeited_reward = 0.0;  // collected during the failed decision
  int steps = 0;
};

struct EpisodeOptions {
  Behavior behavior = Behavior::high_level;
  double epsilon = 0.0;
  ExploreWeights weights;
  bool record_low = true;
  bool record_trajectory = false;
};

EpisodeResult run_episode(const ExecutionContext& ctx, const EpisodeOptions& options, Rng& env_rng, Rng& rng);

}  // namespace sse

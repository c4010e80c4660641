#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <map>

#include "oracles.hpp"
#include "sse/high_level.hpp"

namespace {

using sse::AugmentedState;
using sse::GoalPoint;
using sse::HighPolicy;
using sse::HighTransition;

double chi_critical(int dof) { return boost::math::quantile(boost::math::chi_squared(dof), 0.999); }

HighPolicy policy_for(const sse::EnvConfig& env, const sse::LandmarkGraph& graph) {
  std::vector<GoalPoint> candidates = graph.nodes();
  const auto goals = env.task.goal_points();
  candidates.insert(candidates.end(), goals.begin(), goals.end());
  return HighPolicy(candidates, static_cast<int>(goals.size()), sse::HighConfig{});
}

// A low-level learner trained to convergence on every lattice transition of
// an open box, for every waypoint offset.
sse::LowLearner converged_low(const sse::Box& b, int horizon) {
  sse::LowConfig cfg;
  cfg.relabel = false;
  cfg.tau = 0.05;
  cfg.horizon = horizon;
  sse::LowLearner low(b, cfg);
  std::vector<sse::LowTransition> batch;
  for (int x = static_cast<int>(b.x_min); x <= static_cast<int>(b.x_max); ++x) {
    for (int y = static_cast<int>(b.y_min); y <= static_cast<int>(b.y_max); ++y) {
      const GoalPoint p{static_cast<double>(x), static_cast<double>(y)};
      for (int ox = -3; ox <= 3; ++ox) {
        for (int oy = -3; oy <= 3; ++oy) {
          const GoalPoint wp{p.x + ox, p.y + oy};
          for (int a = 0; a < sse::kActionCount; ++a) {
            const sse::Action v = low.action_vector(a);
            const GoalPoint n{std::clamp(p.x + v.dx, b.x_min, b.x_max), std::clamp(p.y + v.dy, b.y_min, b.y_max)};
            batch.push_back(low.make_transition(p, wp, a, n));
          }
        }
      }
    }
  }
  sse::Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    std::shuffle(batch.begin(), batch.end(), rng);
    low.update(batch, rng);
  }
  return low;
}

TEST(StuckCheck, Examples) {
  std::vector<GoalPoint> still(500, GoalPoint{1, 1});
  EXPECT_TRUE(sse::stuck_check(still, 500, 0.05));
  std::vector<GoalPoint> moved(499, GoalPoint{1, 1});
  moved.push_back({3, 1});
  EXPECT_FALSE(sse::stuck_check(moved, 500, 0.05));
  EXPECT_FALSE(sse::stuck_check(std::vector<GoalPoint>(499, GoalPoint{1, 1}), 500, 0.05));
}

TEST(StuckDetector, AgreesWithTheBatchCheckOnRandomStreams) {
  sse::Rng rng(3);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::bernoulli_distribution jump(0.02);
  for (int trial = 0; trial < 20; ++trial) {
    sse::StuckDetector det(40, 0.05);
    std::vector<GoalPoint> history;
    GoalPoint p{5, 5};
    for (int i = 0; i < 2000; ++i) {
      if (jump(rng)) p = {p.x + 1.0, p.y};
      const GoalPoint q{p.x + jitter(rng), p.y + jitter(rng)};
      history.push_back(q);
      const bool fired = det.push(q);
      ASSERT_EQ(fired, sse::stuck_check(history, 40, 0.05)) << "trial " << trial << " step " << i;
      if (fired) break;
    }
  }
}

TEST(DecisionTime, Additive) {
  EXPECT_EQ(sse::next_decision_time(0, 37), 37);
  EXPECT_EQ(sse::next_decision_time(sse::next_decision_time(0, 10), 20), 30);
}

TEST(HighPolicy, KeySeparatesCellsBucketsAndFlags) {
  const HighPolicy h({{0, 0}, {2, 0}}, 1, sse::HighConfig{});
  const AugmentedState a{3, 0, 600, 0};
  EXPECT_NE(h.key(a), h.key({4, 0, 600, 0}));
  EXPECT_NE(h.key(a), h.key({3, 0, 600, 1}));
  EXPECT_NE(h.key(a), h.key({3, 300, 600, 0}));
  EXPECT_EQ(h.key(a), h.key({3, 59, 600, 0}));
  EXPECT_NE(h.key({3, 599, 600, 0}), h.key({3, 600, 600, 0}));
}

TEST(HighPolicy, GreedyLimitPicksTheUniqueMax) {
  const sse::EnvConfig env = sse::builtin_env("u_maze");
  const auto graph = sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls);
  HighPolicy h = policy_for(env, graph);
  const AugmentedState s{0, 0, 600, 0};
  for (int c = 0; c < h.column_count(); ++c) h.set_value(s, c, c == 17 ? 0.5 : 0.1);
  sse::Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto choice = h.select_subgoal_h(s, 0.0, env, rng);
    ASSERT_EQ(choice.column, 17);
    ASSERT_EQ(choice.point, h.candidates()[17]);
  }
}

TEST(HighPolicy, AllEqualValuesGiveUniformGreedyColumns) {
  const sse::EnvConfig env = sse::builtin_env("u_maze");
  const auto graph = sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls);
  HighPolicy h = policy_for(env, graph);
  const AugmentedState s{5, 0, 600, 0};
  for (int c = 0; c < h.column_count(); ++c) h.set_value(s, c, 0.25);
  sse::Rng rng(2);
  std::vector<int> counts(static_cast<std::size_t>(h.column_count()), 0);
  for (int i = 0; i < 100 * h.column_count(); ++i) ++counts[static_cast<std::size_t>(h.greedy(s, rng))];
  EXPECT_LT(oracle::chi_square_uniform(counts), chi_critical(h.column_count() - 1));
}

TEST(HighPolicy, FullRandomBranchIsUniformOverFreeSpace) {
  const sse::EnvConfig env = sse::builtin_env("u_maze");
  const auto graph = sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls);
  const HighPolicy h = policy_for(env, graph);
  // Wall-aligned 2x2 cells are either entirely free or entirely blocked.
  const sse::GridPartition part(env.bounds, 2.0);
  sse::Rng rng(3);
  std::map<int, int> counts;
  for (int i = 0; i < 10000; ++i) {
    const auto c = h.select_subgoal_h({0, 0, 600, 0}, 1.0, env, rng);
    ASSERT_EQ(c.source, sse::SubgoalSource::random);
    ASSERT_TRUE(env.free(c.point));
    ++counts[part.cell_of(c.point)];
  }
  std::vector<int> free_counts;
  for (int m = 0; m < part.cell_count(); ++m) {
    if (!sse::inside_any(env.walls, part.cell_box(m).center())) free_counts.push_back(counts[m]);
  }
  EXPECT_LT(oracle::chi_square_uniform(free_counts), chi_critical(static_cast<int>(free_counts.size()) - 1));
}

TEST(HighPolicy, ExplorationMixtureBranchFrequencies) {
  const sse::EnvConfig env = sse::builtin_env("u_maze");
  const auto graph = sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls);
  HighPolicy h = policy_for(env, graph);
  sse::GridPartition part(env.bounds, 2.0);
  part.exclude_wall_cells(env.walls);
  const AugmentedState s{0, 0, 600, 0};
  // The greedy subgoal is the goal itself; branches are still drawn independently.
  h.set_value(s, h.goal_column(0), 1.0);
  const GoalPoint goal = env.task.points[0];
  sse::Rng rng(4);
  std::map<sse::SubgoalSource, int> counts;
  std::vector<int> novel(static_cast<std::size_t>(part.cell_count()), 0);
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    const auto c = h.select_subgoal_exp(s, goal, sse::ExploreWeights{}, part, env, rng);
    ++counts[c.source];
    if (c.source == sse::SubgoalSource::novel) ++novel[static_cast<std::size_t>(part.cell_of(c.point))];
    if (c.source == sse::SubgoalSource::greedy) {
      ASSERT_EQ(c.point, goal);
    }
  }
  for (auto src : {sse::SubgoalSource::goal, sse::SubgoalSource::greedy, sse::SubgoalSource::novel}) {
    EXPECT_NEAR(counts[src] / static_cast<double>(n), 1.0 / 3.0, 0.01);
  }
  // Every cell is unvisited, so the novel branch is uniform over admissible cells.
  std::vector<int> admissible;
  for (int m = 0; m < part.cell_count(); ++m) {
    if (part.admissible(m)) admissible.push_back(novel[static_cast<std::size_t>(m)]);
  }
  EXPECT_LT(oracle::chi_square_uniform(admissible), chi_critical(static_cast<int>(admissible.size()) - 1));
}

TEST(HighPolicy, RemovedBranchesAreNeverDrawn) {
  const sse::EnvConfig env = sse::builtin_env("u_maze");
  const auto graph = sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls);
  const HighPolicy h = policy_for(env, graph);
  sse::GridPartition part(env.bounds, 2.0);
  sse::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto c = h.select_subgoal_exp({0, 0, 600, 0}, env.task.points[0], {0.0, 1.0, 1.0}, part, env, rng);
    EXPECT_NE(c.source, sse::SubgoalSource::goal);
  }
  EXPECT_THROW(h.select_subgoal_exp({0, 0, 600, 0}, env.task.points[0], {0.0, 0.0, 0.0}, part, env, rng),
               std::invalid_argument);
}

TEST(HighPolicy, TdTargets) {
  HighPolicy h({{0, 0}, {2, 0}, {4, 0}}, 1, sse::HighConfig{});
  const AugmentedState s{0, 0, 600, 0}, next{1, 100, 600, 0};
  h.set_value(next, 0, 0.2);
  h.set_value(next, 1, 1.0);
  h.set_value(next, 2, 0.5);

  HighTransition t;
  t.state = s;
  t.next_state = next;
  t.reward = 1.0;
  t.success = true;
  EXPECT_NEAR(h.td_target(t), 1.4, 1e-12);

  t.reward = 0.0;
  EXPECT_NEAR(h.td_target(t), 0.4, 1e-12);

  HighTransition fail;
  fail.state = s;
  fail.next_state = {1, 600, 600, 0};
  fail.terminal = true;
  EXPECT_EQ(h.td_target(fail), 0.0);

  const double before = h.value(s, 1);
  t.action = 1;
  h.update(std::vector<HighTransition>{t, t});
  EXPECT_GT(h.value(s, 1), before);
  EXPECT_LE(h.value(s, 1), 0.4);
  EXPECT_THROW(h.update(std::vector<HighTransition>{}), std::invalid_argument);
}

TEST(HighPolicy, SerializationRoundTrip) {
  HighPolicy h({{0, 0}, {2, 0}}, 1, sse::HighConfig{});
  h.set_value({3, 10, 600, 1}, 1, 0.7);
  h.set_value({1, 0, 600, 0}, 0, 0.3);
  std::stringstream buf;
  h.write(buf);
  HighPolicy back({{0, 0}, {2, 0}}, 1, sse::HighConfig{});
  back.read(buf);
  EXPECT_EQ(back.value({3, 10, 600, 1}, 1), 0.7);
  EXPECT_EQ(back.value({1, 0, 600, 0}, 0), 0.3);
  EXPECT_EQ(back.row_count(), 2u);
}

struct Fixture {
  sse::EnvConfig env;
  sse::LandmarkGraph graph;
  sse::GridPartition partition;
  sse::LowLearner low;
  HighPolicy high;
  sse::ExecutionParams params;

  explicit Fixture(sse::EnvConfig e, bool trained_low = true)
      : env(std::move(e)),
        graph(sse::LandmarkGraph::grid(env.bounds, 2.0, env.walls)),
        partition(env.bounds, 2.0),
        low(trained_low ? converged_low(env.bounds, env.horizon) : sse::LowLearner(env.bounds, {})),
        high(policy_for(env, graph)) {}

  sse::ExecutionContext context() const { return {env, graph, partition, low, high, params}; }
};

sse::EnvConfig strip(double slip_x, double horizon) {
  sse::EnvConfig c;
  c.name = "strip";
  c.bounds = {0, 0, 12, 4};
  c.start = {0, 2};
  c.task = {sse::TaskKind::single_goal, {{12, 4}}};
  c.horizon = static_cast<int>(horizon);
  if (slip_x >= 0) c.slip_zones = {{{slip_x - 0.5, -1, slip_x + 0.5, 5}, 1.0}};
  return c;
}

TEST(ExecuteSubgoal, SubgoalWithinLambdaSucceedsImmediately) {
  const Fixture f(strip(-1, 100));
  sse::EnvState state = sse::reset(f.env);
  sse::StuckDetector stuck;
  sse::Rng env_rng(1), rng(2);
  const sse::SubgoalChoice choice{{1.0, 2.5}, 0, sse::SubgoalSource::random};
  const auto o = sse::execute_subgoal(f.context(), state, choice, stuck, env_rng, rng, {});
  EXPECT_TRUE(o.transition.success);
  EXPECT_EQ(o.steps, 0);
  EXPECT_EQ(o.reward_sum, 0.0);
  EXPECT_TRUE(o.episode_continues);
  EXPECT_EQ(state.t, 0);
}

TEST(ExecuteSubgoal, StuckUntilHorizonIsAZeroRewardTerminalFailure) {
  sse::EnvConfig env = strip(-1, 200);
  env.slip_zones = {{{-1, -1, 1, 5}, 1.0}};  // the start is inside
  const Fixture f(env);
  sse::EnvState state = sse::reset(f.env);
  sse::StuckDetector stuck(500, 0.05);
  sse::Rng env_rng(1), rng(2);
  const sse::SubgoalChoice choice{{10, 2}, f.high.nearest_column({10, 2}), sse::SubgoalSource::random};
  const auto o = sse::execute_subgoal(f.context(), state, choice, stuck, env_rng, rng, {});
  EXPECT_TRUE(o.failed);
  EXPECT_FALSE(o.episode_continues);
  EXPECT_EQ(o.transition.reward, 0.0);
  EXPECT_TRUE(o.transition.terminal);
  EXPECT_EQ(o.transition.next_state.time_fraction(), 1.0);
  EXPECT_EQ(o.steps, 200);
  EXPECT_FALSE(o.hindsight.has_value());
}

TEST(ExecuteSubgoal, FailureAfterReachingWaypointsAddsHindsightSuccess) {
  const Fixture f(strip(8, 1000));
  sse::EnvState state = sse::reset(f.env);
  sse::StuckDetector stuck(500, 0.05);
  sse::Rng env_rng(1), rng(2);
  const GoalPoint sub{12, 2};
  const sse::SubgoalChoice choice{sub, f.high.nearest_column(sub), sse::SubgoalSource::random};
  std::vector<sse::TrajectoryPoint> traj;
  sse::RolloutSinks sinks;
  sinks.trajectory = &traj;
  const auto o = sse::execute_subgoal(f.context(), state, choice, stuck, env_rng, rng, sinks);

  ASSERT_TRUE(o.failed);
  EXPECT_EQ(o.transition.reward, 0.0);
  EXPECT_NEAR(state.position.x, 8.0, 1e-9);
  ASSERT_TRUE(o.hindsight.has_value());
  const HighTransition& h = *o.hindsight;
  EXPECT_TRUE(h.success);
  EXPECT_TRUE(h.hindsight);
  EXPECT_FALSE(h.terminal);
  // The relabelled subgoal is a planned waypoint the agent actually reached.
  const auto it = std::find(o.path.waypoints.begin(), o.path.waypoints.end(), h.subgoal);
  ASSERT_NE(it, o.path.waypoints.end());
  EXPECT_EQ(h.action, o.path.node_ids[static_cast<std::size_t>(it - o.path.waypoints.begin())]);
  EXPECT_GE(h.subgoal.x, 2.0);
  const bool visited = std::any_of(traj.begin(), traj.end(), [&](const sse::TrajectoryPoint& p) {
    return sse::distance(p.position, h.subgoal) < f.params.lambda;
  });
  EXPECT_TRUE(visited);
}

TEST(ExecuteSubgoal, FixedStepModeRunsExactlyKSteps) {
  Fixture f(strip(8, 1000));
  f.params.fixed_steps = 7;
  sse::EnvState state = sse::reset(f.env);
  sse::StuckDetector stuck(500, 0.05);
  sse::Rng env_rng(1), rng(2);
  const sse::SubgoalChoice choice{{12, 2}, 0, sse::SubgoalSource::random};
  for (int d = 0; d < 5; ++d) {
    const auto o = sse::execute_subgoal(f.context(), state, choice, stuck, env_rng, rng, {});
    EXPECT_EQ(o.steps, 7);
    EXPECT_FALSE(o.failed);
    EXPECT_TRUE(o.episode_continues);
  }
  EXPECT_EQ(state.t, 35);
}

TEST(RunEpisode, NoDecisionFollowsAFailure) {
  const Fixture f(sse::builtin_env("bottleneck"), false);
  sse::Rng env_rng(5), rng(6);
  int failures = 0;
  for (int e = 0; e < 40; ++e) {
    sse::EpisodeOptions opt;
    opt.behavior = e % 2 ? sse::Behavior::exploration : sse::Behavior::high_level;
    opt.epsilon = 1.0;
    const auto ep = sse::run_episode(f.context(), opt, env_rng, rng);
    for (std::size_t i = 0; i < ep.transitions.size(); ++i) {
      if (!ep.transitions[i].success) {
        ++failures;
        EXPECT_EQ(i + 1, ep.transitions.size());
        EXPECT_EQ(ep.transitions[i].reward, 0.0);
      }
    }
    EXPECT_LE(ep.decisions.size(), static_cast<std::size_t>(f.params.max_decisions));
  }
  EXPECT_GT(failures, 0);
}

}  // namespace

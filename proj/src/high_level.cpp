#include "sse/high_level.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "sse/binary_io.hpp"

namespace sse {

AugmentedState augment(const EnvState& state, const GridPartition& partition, int horizon) {
  return {partition.cell_of(state.position), state.t, horizon, state.flags};
}

GoalPoint uniform_free_point(const EnvConfig& env, Rng& rng) {
  for (int i = 0; i < 100000; ++i) {
    const GoalPoint p = uniform_point(env.bounds, rng);
    if (!inside_any(env.walls, p)) return p;
  }
  throw std::runtime_error("free space too small to sample");
}

GoalPoint current_goal(const Task& task, std::uint32_t flags) {
  if (task.kind == TaskKind::double_goal) {
    for (std::size_t i = 0; i < task.points.size(); ++i) {
      if (!(flags & (1u << i))) return task.points[i];
    }
  }
  return task.goal_points().back();
}

// ---------------------------------------------------------------- HighPolicy

HighPolicy::HighPolicy(std::vector<GoalPoint> candidates, int goal_columns, HighConfig config)
    : config_(config), candidates_(std::move(candidates)), goal_columns_(goal_columns) {
  if (candidates_.empty()) throw std::invalid_argument("empty subgoal candidate set");
  if (goal_columns < 0 || goal_columns > column_count()) throw std::invalid_argument("bad goal column count");
  if (config.time_buckets <= 0) throw std::invalid_argument("time_buckets must be positive");
  table_ = TwinQTable(0, candidates_.size(), 0.0, config.tau);
}

int HighPolicy::nearest_column(GoalPoint p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < column_count(); ++i) {
    const double d = distance(p, candidates_[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::uint64_t HighPolicy::key(const AugmentedState& s) const {
  const std::int64_t b = static_cast<std::int64_t>(s.step) * config_.time_buckets / s.horizon;
  const auto bucket = static_cast<std::uint64_t>(std::clamp<std::int64_t>(b, 0, config_.time_buckets));
  return (static_cast<std::uint64_t>(s.cell) << 32) | (bucket << 20) | (s.flags & 0xFFFFFu);
}

std::optional<std::size_t> HighPolicy::row_of(const AugmentedState& s) const {
  const auto it = rows_.find(key(s));
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::size_t HighPolicy::ensure_row(const AugmentedState& s) {
  const auto [it, inserted] = rows_.try_emplace(key(s), table_.rows());
  if (inserted) table_.add_row();
  return it->second;
}

double HighPolicy::value(const AugmentedState& s, int column) const {
  const auto r = row_of(s);
  return r ? table_.estimate(*r, static_cast<std::size_t>(column)) : 0.0;
}

double HighPolicy::target_value(const AugmentedState& s, int column) const {
  const auto r = row_of(s);
  return r ? table_.target_min(*r, static_cast<std::size_t>(column)) : 0.0;
}

void HighPolicy::set_value(const AugmentedState& s, int column, double v) {
  table_.set(ensure_row(s), static_cast<std::size_t>(column), v);
}

int HighPolicy::greedy(const AugmentedState& s, Rng& rng) const {
  const auto r = row_of(s);
  const int n = column_count();
  if (!r) return std::uniform_int_distribution<int>(0, n - 1)(rng);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> ties;
  for (int c = 0; c < n; ++c) {
    const double v = table_.estimate(*r, static_cast<std::size_t>(c));
    if (v > best) {
      best = v;
      ties.assign(1, c);
    } else if (v == best) {
      ties.push_back(c);
    }
  }
  if (ties.size() == 1) return ties.front();
  return ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];
}

int HighPolicy::argmax_lowest(std::size_t row) const {
  int best = 0;
  double best_v = table_.estimate(row, 0);
  for (int c = 1; c < column_count(); ++c) {
    const double v = table_.estimate(row, static_cast<std::size_t>(c));
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

SubgoalChoice HighPolicy::select_subgoal_h(const AugmentedState& s, double epsilon, const EnvConfig& env,
                                           Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    const GoalPoint p = uniform_free_point(env, rng);
    return {p, nearest_column(p), SubgoalSource::random};
  }
  const int c = greedy(s, rng);
  return {candidates_[static_cast<std::size_t>(c)], c, SubgoalSource::greedy};
}

SubgoalChoice HighPolicy::select_subgoal_exp(const AugmentedState& s, GoalPoint goal,
                                             const ExploreWeights& weights, const GridPartition& partition,
                                             const EnvConfig& env, Rng& rng) const {
  if (!weights.any()) throw std::invalid_argument("exploration mixture has no branch");
  std::discrete_distribution<int> branch({weights.goal, weights.greedy, weights.novel});
  switch (branch(rng)) {
    case 0: return {goal, nearest_column(goal), SubgoalSource::goal};
    case 1: {
      const int c = greedy(s, rng);
      return {candidates_[static_cast<std::size_t>(c)], c, SubgoalSource::greedy};
    }
    default: {
      const int m = partition.novel_cell(rng);
      const GoalPoint p = partition.sample_in_cell(m, env.walls, rng).value_or(partition.cell_box(m).center());
      return {p, nearest_column(p), SubgoalSource::novel};
    }
  }
}

double HighPolicy::td_target(const HighTransition& t) const {
  double y = t.reward;
  if (!t.terminal) {
    if (const auto r = row_of(t.next_state)) {
      const int a = argmax_lowest(*r);
      y += config_.gamma * (config_.twin ? table_.target_min(*r, static_cast<std::size_t>(a))
                                          : table_.target(*r, static_cast<std::size_t>(a), 0));
    }
  }
  return y;
}

void HighPolicy::update(std::span<const HighTransition> batch) {
  if (batch.empty()) throw std::invalid_argument("empty high-level batch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const HighTransition& t = batch[i];
    const double y = td_target(t);
    const std::size_t r = ensure_row(t.state);
    const auto c = static_cast<std::size_t>(t.action);
    if (config_.twin) {
      table_.update(r, c, static_cast<int>(i & 1u), y, config_.learning_rate);
    } else {
      table_.update(r, c, 0, y, config_.learning_rate);
      table_.update(r, c, 1, y, config_.learning_rate);
    }
  }
  table_.tick();
}

double HighPolicy::max_value() const {
  double best = 0.0;
  for (std::size_t r = 0; r < table_.rows(); ++r) {
    for (std::size_t c = 0; c < table_.cols(); ++c) {
      best = std::max({best, table_.online(r, c, 0), table_.online(r, c, 1)});
    }
  }
  return best;
}

void HighPolicy::write(std::ostream& out) const {
  // Rows are stored in key order so the file does not depend on hash layout.
  std::vector<std::pair<std::uint64_t, std::size_t>> rows(rows_.begin(), rows_.end());
  std::sort(rows.begin(), rows.end());
  binary::put<std::uint64_t>(out, rows.size());
  for (const auto& [k, r] : rows) {
    binary::put(out, k);
    binary::put<std::uint64_t>(out, r);
  }
  table_.write(out);
}

void HighPolicy::read(std::istream& in) {
  const auto n = binary::get<std::uint64_t>(in);
  std::unordered_map<std::uint64_t, std::size_t> rows;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto k = binary::get<std::uint64_t>(in);
    rows[k] = binary::get<std::uint64_t>(in);
  }
  TwinQTable t;
  t.read(in);
  if (t.cols() != candidates_.size() || t.rows() != rows.size()) {
    throw std::runtime_error("high-level table shape does not match the candidate set");
  }
  rows_ = std::move(rows);
  table_ = std::move(t);
}

// ------------------------------------------------------------ stuck detection

bool stuck_check(std::span<const GoalPoint> positions, std::size_t window, double motion_epsilon) {
  if (window == 0 || positions.size() < window) return false;
  const auto recent = positions.last(window);
  for (std::size_t i = 0; i < recent.size(); ++i) {
    for (std::size_t j = i + 1; j < recent.size(); ++j) {
      if (distance(recent[i], recent[j]) >= motion_epsilon) return false;
    }
  }
  return true;
}

bool StuckDetector::push(GoalPoint p) {
  std::size_t keep_from = 0;
  for (std::size_t i = run_.size(); i-- > 0;) {
    if (distance(run_[i], p) >= epsilon_) {
      keep_from = i + 1;
      break;
    }
  }
  if (keep_from > 0) run_.erase(run_.begin(), run_.begin() + static_cast<std::ptrdiff_t>(keep_from));
  run_.push_back(p);
  if (run_.size() > window_) run_.erase(run_.begin());
  return fired();
}

// ------------------------------------------------------------------ rollout

RawCostFn low_level_costs(const LowLearner& low, const EdgeCostParams& params) {
  return [&low, params](const GoalPoint& from, const GoalPoint& to) {
    return edge_cost(from, to, low.q_value(from, to), params);
  };
}

namespace {

int completed_goal_index(const Task& task, GoalPoint p) {
  const auto goals = task.goal_points();
  int best = 0;
  for (int i = 1; i < static_cast<int>(goals.size()); ++i) {
    if (distance(p, goals[static_cast<std::size_t>(i)]) < distance(p, goals[static_cast<std::size_t>(best)])) best = i;
  }
  return best;
}

}  // namespace

DecisionOutcome execute_subgoal(const ExecutionContext& ctx, EnvState& state, const SubgoalChoice& choice,
                                StuckDetector& stuck, Rng& env_rng, Rng& rng, const RolloutSinks& sinks) {
  const ExecutionParams& p = ctx.params;
  if (!(p.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const int horizon = ctx.env.horizon;
  const bool strict = p.fixed_steps <= 0;

  DecisionOutcome out;
  HighTransition& tr = out.transition;
  tr.state = augment(state, ctx.partition, horizon);
  tr.goal = current_goal(ctx.env.task, state.flags);
  tr.subgoal = choice.point;
  tr.action = choice.column;

  try {
    out.path = ctx.graph.plan_path(state.position, choice.point, low_level_costs(ctx.low, p.cost), &ctx.partition,
                                   p.c_dist);
  } catch (const PlannerError&) {
    out.path = WaypointPath{{choice.point}, {-1}, 0.0, true};
  }
  const auto& wps = out.path.waypoints;
  const double wp_radius = ctx.low.config().waypoint_radius;

  std::size_t wi = 0;
  int reached = -1;
  AugmentedState reach_state;
  GoalPoint reach_position;
  double reach_reward = 0.0;

  auto succeed = [&](bool terminal) {
    tr.reward = out.reward_sum;
    tr.next_state = augment(state, ctx.partition, horizon);
    tr.success = true;
    tr.terminal = terminal || tr.next_state.at_horizon();
    out.episode_continues = !tr.terminal;
    return out;
  };
  auto fail = [&]() {
    tr.reward = 0.0;
    tr.next_state = {ctx.partition.cell_of(state.position), horizon, horizon, state.flags};
    tr.success = false;
    tr.terminal = true;
    out.failed = true;
    out.episode_continues = false;
    if (reached >= 0) {
      const GoalPoint wp = wps[static_cast<std::size_t>(reached)];
      if (distance(reach_position, wp) < p.lambda) {
        HighTransition h;
        h.state = tr.state;
        h.goal = tr.goal;
        h.subgoal = wp;
        h.action = out.path.node_ids[static_cast<std::size_t>(reached)];
        h.reward = reach_reward;
        h.next_state = reach_state;
        h.success = true;
        h.terminal = reach_state.at_horizon();
        h.hindsight = true;
        out.hindsight = h;
      }
    }
    return out;
  };

  if (strict && distance(state.position, choice.point) < p.lambda) return succeed(false);

  while (true) {
    while (distance(state.position, wps[wi]) < wp_radius) {
      if (out.steps > 0 && out.path.node_ids[wi] >= 0 && static_cast<int>(wi) > reached) {
        reached = static_cast<int>(wi);
        reach_state = augment(state, ctx.partition, horizon);
        reach_position = state.position;
        reach_reward = out.reward_sum;
      }
      if (wi + 1 >= wps.size()) break;
      ++wi;
    }

    // The controller chases the waypoint's state-cell center so that the
    // -1/0 reward is consistent with its key.
    const GoalPoint from = state.position;
    const GoalPoint target = ctx.low.snap(wps[wi]);
    const int a = ctx.low.act(from, target, p.low_noise, rng);
    const StepResult sr = step(state, ctx.low.action_vector(a), ctx.env, env_rng);
    if (sinks.low && !sr.next_state.stuck_in_slip && ctx.low.within_key_range(from, target)) {
      sinks.low->push_back(ctx.low.make_transition(from, target, a, sr.next_state.position));
    }
    state = sr.next_state;
    ++out.steps;
    out.reward_sum += sr.reward;
    if (sinks.trajectory) sinks.trajectory->push_back({state.t, state.position, sr.reward, state.flags});
    if (sinks.visited_cells) sinks.visited_cells->push_back(ctx.partition.cell_of(state.position));
    const bool stuck_now = stuck.push(state.position);

    if (!strict) {
      if (sr.done || out.steps >= p.fixed_steps) return succeed(sr.done);
      continue;
    }
    if (distance(state.position, choice.point) < p.lambda) return succeed(sr.done);
    if (sr.task_complete) {
      // The task ended on the way: credit the decision to the goal reached,
      // or to the end position when lambda is tighter than the goal radius.
      const int gi = completed_goal_index(ctx.env.task, state.position);
      const int column = ctx.high.goal_column(gi);
      const GoalPoint goal_point = ctx.high.candidates()[static_cast<std::size_t>(column)];
      if (distance(state.position, goal_point) < p.lambda) {
        tr.action = column;
        tr.subgoal = goal_point;
      } else {
        tr.action = ctx.high.nearest_column(state.position);
        tr.subgoal = state.position;
      }
      return succeed(true);
    }
    if (sr.done || stuck_now) return fail();
  }
}

EpisodeResult run_episode(const ExecutionContext& ctx, const EpisodeOptions& options, Rng& env_rng, Rng& rng) {
  EpisodeResult res;
  res.behavior = options.behavior;
  const int horizon = ctx.env.horizon;
  const bool strict = ctx.params.fixed_steps <= 0;
  EnvState state = reset(ctx.env);
  StuckDetector stuck(ctx.params.stuck_window, ctx.params.motion_epsilon);
  stuck.push(state.position);
  res.visited_cells.push_back(ctx.partition.cell_of(state.position));
  if (options.record_trajectory) res.trajectory.push_back({0, state.position, 0.0, state.flags});

  RolloutSinks sinks;
  sinks.low = options.record_low ? &res.low : nullptr;
  sinks.trajectory = options.record_trajectory ? &res.trajectory : nullptr;
  sinks.visited_cells = &res.visited_cells;

  for (int d = 0;; ++d) {
    if (strict && d >= ctx.params.max_decisions) {
      res.truncated = true;
      break;
    }
    const AugmentedState s = augment(state, ctx.partition, horizon);
    const GoalPoint goal = current_goal(ctx.env.task, state.flags);
    const SubgoalChoice choice =
        options.behavior == Behavior::exploration
            ? ctx.high.select_subgoal_exp(s, goal, options.weights, ctx.partition, ctx.env, rng)
            : ctx.high.select_subgoal_h(s, options.epsilon, ctx.env, rng);
    DecisionOutcome o = execute_subgoal(ctx, state, choice, stuck, env_rng, rng, sinks);

    DecisionRecord rec;
    rec.index = d;
    rec.state = s;
    rec.choice = choice;
    rec.path_length = o.path.waypoints.size();
    rec.fallback = o.path.fallback;
    rec.steps = o.steps;
    rec.success = o.transition.success;
    rec.reward = o.transition.reward;
    rec.waypoints = o.path.waypoints;
    res.decisions.push_back(std::move(rec));

    res.env_reward += o.reward_sum;
    res.transitions.push_back(o.transition);
    if (o.hindsight) res.hindsight.push_back(*o.hindsight);
    if (o.failed) {
      res.failure = std::make_pair(state.position, choice.point);
      res.forfeited_reward = o.reward_sum;
    }
    if (!o.episode_continues) break;
  }
  res.task_complete = state.flags == ctx.env.task.complete_mask();
  res.steps = state.t;
  return res;
}

}  // namespace sse

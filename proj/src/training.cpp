#include "sse/training.hpp"

#include <iomanip>
#include <sstream>

#include "sse/binary_io.hpp"

namespace sse {

std::vector<HighTransition> HighBuffer::sample(std::size_t batch, Rng& rng) const {
  if (empty()) throw std::logic_error("sampling from an empty high-level buffer");
  std::vector<HighTransition> out;
  out.reserve(batch);
  if (!success_.empty() && !zero_.empty()) {
    const std::size_t half = batch / 2;
    for (std::size_t i = 0; i < half; ++i) out.push_back(success_.sample(rng));
    for (std::size_t i = half; i < batch; ++i) out.push_back(zero_.sample(rng));
  } else {
    const auto& only = success_.empty() ? zero_ : success_;
    for (std::size_t i = 0; i < batch; ++i) out.push_back(only.sample(rng));
  }
  return out;
}

double Schedules::epsilon() const {
  const double window = epsilon_decay_fraction * static_cast<double>(total_episodes);
  if (window <= 0.0) return epsilon_min;
  const double f = std::min(1.0, static_cast<double>(episodes_elapsed) / window);
  return 1.0 - (1.0 - epsilon_min) * f;
}

Behavior choose_behavior_policy(const Schedules& schedules, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < schedules.eta_current() ? Behavior::exploration : Behavior::high_level;
}

void TrainingConfig::validate() const {
  env.validate();
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(lambda > 0.0, "lambda must be > 0");
  require(grid_spacing > 0.0, "grid_spacing must be > 0");
  require(c_dist > 1.0, "c_dist must be > 1");
  require(eta > 0.0 && eta <= 1.0, "eta must be in (0, 1]");
  require(epsilon_min >= 0.0 && epsilon_min <= 1.0, "epsilon_min must be in [0, 1]");
  require(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0, "epsilon_decay_fraction must be in [0, 1]");
  require(high.gamma > 0.0 && high.gamma < 1.0, "gamma_high must be in (0, 1)");
  require(low.gamma > 0.0 && low.gamma < 1.0, "gamma_low must be in (0, 1)");
  require(high.tau >= 0.0 && high.tau <= 1.0 && low.tau >= 0.0 && low.tau <= 1.0, "tau must be in [0, 1]");
  require(high.learning_rate > 0.0 && high.learning_rate <= 1.0, "lr_high must be in (0, 1]");
  require(low.learning_rate > 0.0 && low.learning_rate <= 1.0, "lr_low must be in (0, 1]");
  require(iterations >= 0, "iterations must be >= 0");
  require(episodes_per_iteration > 0, "episodes_per_iteration must be > 0");
  require(high_batches >= 0 && low_batches >= 0, "batch counts must be >= 0");
  require(batch_size > 0, "batch_size must be > 0");
  require(high_capacity > 1 && low_capacity > 0, "buffer capacities must be positive");
  require(low_noise >= 0.0, "low_noise must be >= 0");
  require(stuck_window > 0 && motion_epsilon > 0.0, "stuck detection needs a window and epsilon > 0");
  require(max_decisions > 0, "max_decisions must be > 0");
  require(eval_episodes >= 0 && eval_every > 0, "eval_episodes >= 0 and eval_every > 0 required");
  require(fixed_step_count > 0, "fixed_step_count must be > 0");
  require(weights.goal >= 0.0 && weights.greedy >= 0.0 && weights.novel >= 0.0, "mixture weights must be >= 0");
  require(!use_exploration || weights.any(), "exploration enabled with every branch removed");
  require(high.time_buckets > 0, "time_buckets must be > 0");
  require(low.max_offset >= 1 && low.cell_size > 0.0, "low-level key shape invalid");
}

double max_episode_reward(const EnvConfig& env) {
  EnvState before;
  double total = 0.0;
  for (std::size_t i = 0; i < env.task.points.size(); ++i) {
    EnvState after = before;
    after.flags |= 1u << i;
    total += reward_of(before, after, env);
    before = after;
  }
  return total;
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

namespace {

enum Stream : std::uint64_t { kEnvStream = 1, kPolicyStream = 2, kUpdateStream = 3, kEvalStream = 1000 };

}  // namespace

Trainer::Trainer(TrainingConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      seed_(seed),
      high_buffer_(config_.high_capacity),
      low_buffer_(config_.low_capacity),
      env_rng_(make_rng(seed, kEnvStream)),
      policy_rng_(make_rng(seed, kPolicyStream)),
      update_rng_(make_rng(seed, kUpdateStream)) {
  config_.validate();
  const EnvConfig& env = config_.env;
  config_.low.horizon = env.horizon;
  config_.low.max_action = env.max_action;

  graph_ = LandmarkGraph::grid(env.bounds, config_.grid_spacing, env.walls);
  partition_ = GridPartition(env.bounds, config_.grid_spacing);
  partition_.exclude_wall_cells(env.walls);
  low_ = LowLearner(env.bounds, config_.low);

  std::vector<GoalPoint> candidates = graph_.nodes();
  const auto goals = env.task.goal_points();
  candidates.insert(candidates.end(), goals.begin(), goals.end());
  high_ = HighPolicy(std::move(candidates), static_cast<int>(goals.size()), config_.high);

  schedules_.eta_target = config_.eta;
  schedules_.epsilon_min = config_.epsilon_min;
  schedules_.epsilon_decay_fraction = config_.epsilon_decay_fraction;
  schedules_.total_episodes = config_.total_episodes();
  reward_cap_ = max_episode_reward(env);
}

ExecutionContext Trainer::context(bool training) const {
  ExecutionParams p;
  p.lambda = config_.lambda;
  p.c_dist = config_.no_refinement ? 1.0 : config_.c_dist;
  p.cost = {config_.low.gamma, config_.env.horizon, config_.euclidean};
  p.low_noise = training ? config_.low_noise : 0.0;
  p.stuck_window = config_.stuck_window;
  p.motion_epsilon = config_.motion_epsilon;
  p.fixed_steps = config_.fixed_steps ? config_.fixed_step_count : 0;
  p.max_decisions = config_.max_decisions;
  return {config_.env, graph_, partition_, low_, high_, p};
}

void Trainer::absorb(const EpisodeResult& ep, long index) {
  double kept = 0.0;
  for (const HighTransition& t : ep.transitions) {
    if (!t.success && t.reward != 0.0) {
      throw std::logic_error("episode " + std::to_string(index) + ": failure transition carries reward");
    }
    kept += t.reward;
    high_buffer_.push(t);
  }
  if (std::abs(kept + ep.forfeited_reward - ep.env_reward) > 1e-9) {
    throw std::logic_error("episode " + std::to_string(index) + ": high-level rewards do not add up");
  }
  for (const HighTransition& t : ep.hindsight) high_buffer_.push(t);
  for (const LowTransition& t : ep.low) low_buffer_.push(t);
  if (ep.failure) partition_.record_subgoal_failure(ep.failure->first, ep.failure->second);
  partition_.record_episode_visits(ep.visited_cells);
}

IterationReport Trainer::run_iteration() {
  IterationReport rep;
  rep.iteration = schedules_.iterations_elapsed;
  rep.eta = schedules_.eta_current();
  rep.epsilon = schedules_.epsilon();

  int successes = 0;
  long decisions = 0;
  long steps = 0;
  for (int e = 0; e < config_.episodes_per_iteration; ++e) {
    const long index = schedules_.episodes_elapsed;
    EpisodeOptions opt;
    opt.behavior = config_.use_exploration ? choose_behavior_policy(schedules_, policy_rng_) : Behavior::high_level;
    opt.epsilon = schedules_.epsilon();
    opt.weights = config_.weights;
    opt.record_trajectory = e + 1 == config_.episodes_per_iteration;
    EpisodeResult ep;
    try {
      ep = run_episode(context(true), opt, env_rng_, policy_rng_);
    } catch (const std::exception& ex) {
      throw std::runtime_error("episode " + std::to_string(index) + ": " + ex.what());
    }
    absorb(ep, index);
    successes += ep.task_complete ? 1 : 0;
    decisions += static_cast<long>(ep.decisions.size());
    steps += ep.steps;
    ++schedules_.episodes_elapsed;
    if (opt.record_trajectory) last_episode_ = std::move(ep);
  }

  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (!low_buffer_.empty()) {
    std::vector<LowTransition> b(batch);
    for (int i = 0; i < config_.low_batches; ++i) {
      for (auto& t : b) t = low_buffer_.sample(update_rng_);
      low_.update(b, update_rng_);
    }
  }
  if (!high_buffer_.empty()) {
    for (int i = 0; i < config_.high_batches; ++i) high_.update(high_buffer_.sample(batch, update_rng_));
    const double bound = reward_cap_ / (1.0 - config_.high.gamma);
    if (high_.max_value() > bound + 1e-9) throw std::logic_error("high-level value exceeds the reward bound");
  }
  ++schedules_.iterations_elapsed;

  rep.episodes = schedules_.episodes_elapsed;
  rep.success_rate = static_cast<double>(successes) / config_.episodes_per_iteration;
  rep.coverage = partition_.coverage();
  rep.mean_decisions = static_cast<double>(decisions) / config_.episodes_per_iteration;
  rep.mean_kt = decisions == 0 ? 0.0 : static_cast<double>(steps) / static_cast<double>(decisions);
  if (config_.eval_episodes > 0 && schedules_.iterations_elapsed % config_.eval_every == 0) {
    rep.eval_success = evaluate(config_.eval_episodes, static_cast<std::uint64_t>(schedules_.iterations_elapsed))
                           .success_rate;
  }
  return rep;
}

EvalReport Trainer::evaluate(int episodes, std::uint64_t stream) const {
  if (episodes <= 0) throw std::invalid_argument("evaluation needs at least one episode");
  Rng env_rng = make_rng(seed_, kEvalStream + 2 * stream);
  Rng rng = make_rng(seed_, kEvalStream + 2 * stream + 1);
  const ExecutionContext ctx = context(false);
  EvalReport rep;
  rep.episodes = episodes;
  int ok = 0;
  for (int i = 0; i < episodes; ++i) {
    EpisodeOptions opt;
    opt.behavior = Behavior::high_level;
    opt.epsilon = 0.0;
    opt.record_low = false;
    opt.record_trajectory = i + 1 == episodes;
    EpisodeResult ep = run_episode(ctx, opt, env_rng, rng);
    if (ep.task_complete) {
      ++ok;
      rep.successful_decisions.push_back(static_cast<int>(ep.decisions.size()));
    }
    if (opt.record_trajectory) rep.last = std::move(ep);
  }
  rep.success_rate = static_cast<double>(ok) / episodes;
  return rep;
}

// --------------------------------------------------------------- checkpoint

std::string Trainer::config_fingerprint() const {
  const TrainingConfig& c = config_;
  std::ostringstream o;
  o << std::setprecision(17);
  o << env_to_text(c.env) << "grid_spacing " << c.grid_spacing << "\nlambda " << c.lambda << "\nc_dist "
    << c.c_dist << "\neta " << c.eta << "\nepsilon_min " << c.epsilon_min << "\nepsilon_decay_fraction "
    << c.epsilon_decay_fraction << "\niterations " << c.iterations << "\nepisodes_per_iteration "
    << c.episodes_per_iteration << "\nhigh_batches " << c.high_batches << "\nlow_batches " << c.low_batches
    << "\nbatch_size " << c.batch_size << "\nhigh_capacity " << c.high_capacity << "\nlow_capacity "
    << c.low_capacity << "\ngamma_high " << c.high.gamma << "\nlr_high " << c.high.learning_rate
    << "\ntau_high " << c.high.tau << "\ntwin_high " << c.high.twin << "\ntime_buckets " << c.high.time_buckets
    << "\ngamma_low " << c.low.gamma << "\nlr_low " << c.low.learning_rate << "\ntau_low " << c.low.tau
    << "\ntwin_low " << c.low.twin << "\nrelabel_low " << c.low.relabel << "\nlow_cell " << c.low.cell_size
    << "\nlow_max_offset " << c.low.max_offset << "\nwaypoint_radius " << c.low.waypoint_radius
    << "\nlow_noise " << c.low_noise << "\neuclidean " << static_cast<int>(c.euclidean) << "\nstuck_window "
    << c.stuck_window << "\nmotion_epsilon " << c.motion_epsilon << "\nmax_decisions " << c.max_decisions
    << "\nno_refinement " << c.no_refinement << "\nfixed_steps " << c.fixed_steps << "\nfixed_step_count "
    << c.fixed_step_count << "\nweights " << c.weights.goal << ' ' << c.weights.greedy << ' ' << c.weights.novel
    << "\nuse_exploration " << c.use_exploration << '\n';
  return o.str();
}

namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_section(std::ostream& out, const char* name) { binary::put_string(out, name); }

void expect_section(std::istream& in, const char* name) {
  const std::string got = binary::get_string(in);
  if (got != name) throw std::runtime_error("checkpoint: expected section '" + std::string(name) + "', found '" + got + "'");
}

void put_aug(std::ostream& out, const AugmentedState& s) {
  binary::put<std::int32_t>(out, s.cell);
  binary::put<std::int32_t>(out, s.step);
  binary::put<std::int32_t>(out, s.horizon);
  binary::put<std::uint32_t>(out, s.flags);
}

AugmentedState get_aug(std::istream& in) {
  AugmentedState s;
  s.cell = binary::get<std::int32_t>(in);
  s.step = binary::get<std::int32_t>(in);
  s.horizon = binary::get<std::int32_t>(in);
  s.flags = binary::get<std::uint32_t>(in);
  return s;
}

void put_point(std::ostream& out, GoalPoint p) {
  binary::put(out, p.x);
  binary::put(out, p.y);
}

GoalPoint get_point(std::istream& in) {
  const double x = binary::get<double>(in);
  return {x, binary::get<double>(in)};
}

void put_high(std::ostream& out, const HighTransition& t) {
  put_aug(out, t.state);
  put_point(out, t.goal);
  put_point(out, t.subgoal);
  binary::put<std::int32_t>(out, t.action);
  binary::put(out, t.reward);
  put_aug(out, t.next_state);
  binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.success | (t.terminal << 1) | (t.hindsight << 2)));
}

HighTransition get_high(std::istream& in) {
  HighTransition t;
  t.state = get_aug(in);
  t.goal = get_point(in);
  t.subgoal = get_point(in);
  t.action = binary::get<std::int32_t>(in);
  t.reward = binary::get<double>(in);
  t.next_state = get_aug(in);
  const auto bits = binary::get<std::uint8_t>(in);
  t.success = bits & 1u;
  t.terminal = bits & 2u;
  t.hindsight = bits & 4u;
  return t;
}

void put_low(std::ostream& out, const LowTransition& t) {
  binary::put(out, t.state_key);
  binary::put(out, t.next_key);
  put_point(out, t.position);
  put_point(out, t.next_position);
  put_point(out, t.waypoint);
  binary::put(out, t.action);
  binary::put(out, t.reward);
  binary::put<std::uint8_t>(out, t.done);
}

LowTransition get_low(std::istream& in) {
  LowTransition t;
  t.state_key = binary::get<std::uint32_t>(in);
  t.next_key = binary::get<std::uint32_t>(in);
  t.position = get_point(in);
  t.next_position = get_point(in);
  t.waypoint = get_point(in);
  t.action = binary::get<std::uint8_t>(in);
  t.reward = binary::get<float>(in);
  t.done = binary::get<std::uint8_t>(in) != 0;
  return t;
}

template <class T, class Put>
void put_ring(std::ostream& out, const RingBuffer<T>& ring, Put put) {
  binary::put<std::uint64_t>(out, ring.head());
  binary::put<std::uint64_t>(out, ring.size());
  for (const T& t : ring.storage()) put(out, t);
}

template <class T, class Get>
void get_ring(std::istream& in, RingBuffer<T>& ring, Get get) {
  const auto head = binary::get<std::uint64_t>(in);
  const auto n = binary::get<std::uint64_t>(in);
  if (n > ring.capacity()) throw std::runtime_error("checkpoint: buffer larger than its capacity");
  std::vector<T> items;
  items.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) items.push_back(get(in));
  ring.restore(std::move(items), head);
}

void put_rng(std::ostream& out, const Rng& rng) {
  std::ostringstream o;
  o << rng;
  binary::put_string(out, o.str());
}

void get_rng(std::istream& in, Rng& rng) {
  std::istringstream i(binary::get_string(in));
  i >> rng;
  if (!i) throw std::runtime_error("checkpoint: bad RNG state");
}

}  // namespace

void Trainer::write_checkpoint(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  binary::put(out, kVersion);
  put_section(out, "config");
  binary::put_string(out, config_fingerprint());
  binary::put(out, seed_);

  put_section(out, "schedules");
  binary::put<std::int32_t>(out, schedules_.iterations_elapsed);
  binary::put<std::int64_t>(out, schedules_.episodes_elapsed);

  put_section(out, "cells");
  std::vector<CellStats> cells(partition_.all_stats().begin(), partition_.all_stats().end());
  binary::put_vector(out, cells);

  put_section(out, "low_q");
  low_.write(out);
  put_section(out, "high_q");
  high_.write(out);

  put_section(out, "high_buffer");
  put_ring(out, high_buffer_.success_half(), put_high);
  put_ring(out, high_buffer_.zero_half(), put_high);
  put_section(out, "low_buffer");
  put_ring(out, low_buffer_, put_low);

  put_section(out, "rng");
  put_rng(out, env_rng_);
  put_rng(out, policy_rng_);
  put_rng(out, update_rng_);
  put_section(out, "end");
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void Trainer::read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic)) throw std::runtime_error("not a checkpoint file");
  if (binary::get<std::uint32_t>(in) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  expect_section(in, "config");
  if (binary::get_string(in) != config_fingerprint()) {
    throw std::runtime_error("checkpoint was written for a different environment or configuration");
  }
  const auto seed = binary::get<std::uint64_t>(in);

  expect_section(in, "schedules");
  const int iterations = binary::get<std::int32_t>(in);
  const long episodes = binary::get<std::int64_t>(in);

  expect_section(in, "cells");
  const auto cells = binary::get_vector<CellStats>(in);
  if (cells.size() != static_cast<std::size_t>(partition_.cell_count())) {
    throw std::runtime_error("checkpoint: cell count mismatch");
  }

  LowLearner low = low_;
  HighPolicy high = high_;
  expect_section(in, "low_q");
  low.read(in);
  expect_section(in, "high_q");
  high.read(in);

  HighBuffer hb(config_.high_capacity);
  RingBuffer<LowTransition> lb(config_.low_capacity);
  expect_section(in, "high_buffer");
  get_ring(in, hb.success_half(), get_high);
  get_ring(in, hb.zero_half(), get_high);
  expect_section(in, "low_buffer");
  get_ring(in, lb, get_low);

  expect_section(in, "rng");
  Rng e, p, u;
  get_rng(in, e);
  get_rng(in, p);
  get_rng(in, u);
  expect_section(in, "end");

  seed_ = seed;
  schedules_.iterations_elapsed = iterations;
  schedules_.episodes_elapsed = episodes;
  for (std::size_t m = 0; m < cells.size(); ++m) partition_.stats(static_cast<int>(m)) = cells[m];
  low_ = std::move(low);
  high_ = std::move(high);
  high_buffer_ = std::move(hb);
  low_buffer_ = std::move(lb);
  env_rng_ = e;
  policy_rng_ = p;
  update_rng_ = u;
}

}  // namespace sse

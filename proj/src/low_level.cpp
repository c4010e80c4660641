#include "sse/low_level.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "sse/binary_io.hpp"
#include "sse/landmark_graph.hpp"

namespace sse {

double low_reward(GoalPoint next_position, GoalPoint waypoint, double radius) {
  return distance(next_position, waypoint) < radius ? 0.0 : -1.0;
}

LowLearner::LowLearner(Box bounds, LowConfig config) : bounds_(bounds), config_(config) {
  if (!bounds.nondegenerate()) throw std::invalid_argument("degenerate bounds");
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) throw std::invalid_argument("gamma_low outside (0,1)");
  if (config.max_offset < 0) throw std::invalid_argument("negative max_offset");
  cols_ = static_cast<int>(std::floor(bounds.width() / config.cell_size + 1e-9)) + 1;
  rows_ = static_cast<int>(std::floor(bounds.height() / config.cell_size + 1e-9)) + 1;
  floor_ = steps_to_value(config.horizon, config.gamma);
  const auto keys = static_cast<std::size_t>(cell_count()) *
                    static_cast<std::size_t>(offsets_per_axis() * offsets_per_axis());
  table_ = TwinQTable(keys, kActionCount, floor_, config.tau);
  shared_ = TwinQTable(static_cast<std::size_t>(offsets_per_axis() * offsets_per_axis()), kActionCount, floor_,
                       config.tau);
  trained_.assign(keys, 0);
}

double LowLearner::value(std::uint32_t key, int action) const {
  const auto a = static_cast<std::size_t>(action);
  return trained(key, action) ? table_.estimate(key, a) : shared_.estimate(offset_row(key), a);
}

void LowLearner::set_value(std::uint32_t key, int action, double v) {
  table_.set(key, static_cast<std::size_t>(action), v);
  trained_[key] |= static_cast<std::uint16_t>(1u << action);
}

double LowLearner::target_of(std::uint32_t key, int action, int twin, bool shared_only) const {
  const auto a = static_cast<std::size_t>(action);
  return !shared_only && trained(key, action) ? table_.target(key, a, twin) : shared_.target(offset_row(key), a, twin);
}

double LowLearner::target_min_of(std::uint32_t key, int action, bool shared_only) const {
  return std::min(target_of(key, action, 0, shared_only), target_of(key, action, 1, shared_only));
}

int LowLearner::cell_index(GoalPoint p) const {
  const int col = std::clamp(static_cast<int>(std::lround((p.x - bounds_.x_min) / config_.cell_size)), 0, cols_ - 1);
  const int row = std::clamp(static_cast<int>(std::lround((p.y - bounds_.y_min) / config_.cell_size)), 0, rows_ - 1);
  return row * cols_ + col;
}

GoalPoint LowLearner::snap(GoalPoint p) const {
  const double c = config_.cell_size;
  return {bounds_.x_min + c * std::lround((p.x - bounds_.x_min) / c),
          bounds_.y_min + c * std::lround((p.y - bounds_.y_min) / c)};
}

bool LowLearner::within_key_range(GoalPoint position, GoalPoint waypoint) const {
  const long k = config_.max_offset;
  return std::labs(std::lround((waypoint.x - position.x) / config_.cell_size)) <= k &&
         std::labs(std::lround((waypoint.y - position.y) / config_.cell_size)) <= k;
}

std::uint32_t LowLearner::key(GoalPoint position, GoalPoint waypoint) const {
  const int k = config_.max_offset;
  const int ox = std::clamp(static_cast<int>(std::lround((waypoint.x - position.x) / config_.cell_size)), -k, k);
  const int oy = std::clamp(static_cast<int>(std::lround((waypoint.y - position.y) / config_.cell_size)), -k, k);
  const int span = offsets_per_axis();
  return static_cast<std::uint32_t>(cell_index(position) * span * span + (ox + k) * span + (oy + k));
}

Action LowLearner::action_vector(int index) const {
  const Action& u = kUnitActions[static_cast<std::size_t>(index)];
  return {u.dx * config_.max_action, u.dy * config_.max_action};
}

int LowLearner::greedy_action(std::uint32_t key, bool shared_only) const {
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) {
    const double v = shared_only ? shared_.estimate(offset_row(key), static_cast<std::size_t>(a)) : value(key, a);
    if (v > best_v) {
      best_v = v;
      best = a;
    }
  }
  return best;
}

int LowLearner::act(GoalPoint position, GoalPoint waypoint, double noise, Rng& rng) const {
  const std::uint32_t k = key(position, waypoint);
  double best_v = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) best_v = std::max(best_v, value(k, a));
  // Untrained entries all tie at the floor; a uniform pick keeps the untrained
  // controller a random walk instead of a hand-made heading rule.
  std::array<int, kActionCount> tied{};
  int n_tied = 0;
  for (int a = 0; a < kActionCount; ++a) {
    if (value(k, a) == best_v) tied[static_cast<std::size_t>(n_tied++)] = a;
  }
  const int best = n_tied == 1 ? tied[0]
                               : tied[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n_tied - 1)(rng))];
  if (noise <= 0.0) return best;

  std::normal_distribution<double> n(0.0, noise);
  const Action g = action_vector(best);
  const double nx = g.dx + n(rng) * config_.max_action;
  const double ny = g.dy + n(rng) * config_.max_action;
  int snapped = 0;
  double snap_d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) {
    const Action v = action_vector(a);
    const double d = std::hypot(v.dx - nx, v.dy - ny);
    if (d < snap_d) {
      snap_d = d;
      snapped = a;
    }
  }
  return snapped;
}

double LowLearner::q_value(GoalPoint from, GoalPoint to) const {
  const std::uint32_t k = key(from, to);
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kActionCount; ++a) best = std::max(best, value(k, a));
  return best;
}

LowTransition LowLearner::make_transition(GoalPoint position, GoalPoint waypoint, int action,
                                          GoalPoint next_position) const {
  LowTransition t;
  t.position = position;
  t.next_position = next_position;
  t.waypoint = waypoint;
  t.action = static_cast<std::uint8_t>(action);
  t.reward = static_cast<float>(low_reward(next_position, waypoint, config_.waypoint_radius));
  t.done = t.reward == 0.0f;
  t.state_key = key(position, waypoint);
  t.next_key = key(next_position, waypoint);
  return t;
}

double LowLearner::td_target(float reward, bool done, std::uint32_t next_key, bool shared_only) const {
  double y = reward;
  if (!done) {
    double next = 0.0;
    if (config_.twin) {
      next = target_min_of(next_key, greedy_action(next_key, shared_only), shared_only);
    } else {
      next = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kActionCount; ++a) next = std::max(next, target_of(next_key, a, 0, shared_only));
    }
    y += config_.gamma * next;
  }
  // Returns below the horizon floor are not representable within an episode.
  return std::max(y, floor_);
}

void LowLearner::update(std::span<const LowTransition> batch, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("empty low-level batch");
  const int span = offsets_per_axis();
  std::uniform_int_distribution<int> pick_offset(0, span * span - 1);
  const double lr = config_.learning_rate;

  auto apply = [&](std::uint32_t key, int action, float reward, bool done, std::uint32_t next_key, bool next_in_range,
                   std::size_t i) {
    // A clipped next key would claim the waypoint is closer than it is.
    const bool bootstrap = done || next_in_range;
    const double y = bootstrap ? td_target(reward, done, next_key) : floor_;
    const double y_shared = bootstrap ? td_target(reward, done, next_key, true) : floor_;
    const auto a = static_cast<std::size_t>(action);
    const std::uint32_t row = offset_row(key);
    if (!trained(key, action)) {
      // First write: start from what the key has been reading so far.
      table_.copy_entry(key, a, shared_, row, a);
      trained_[key] |= static_cast<std::uint16_t>(1u << action);
    }
    if (config_.twin) {
      // Each twin learns from its own half of the batch.
      const int twin = static_cast<int>(i & 1u);
      table_.update(key, a, twin, y, lr);
      shared_.update(row, a, twin, y_shared, lr);
    } else {
      for (int twin = 0; twin < 2; ++twin) {
        table_.update(key, a, twin, y, lr);
        shared_.update(row, a, twin, y_shared, lr);
      }
    }
  };

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LowTransition& t = batch[i];
    apply(t.state_key, t.action, t.reward, t.done, t.next_key, within_key_range(t.next_position, t.waypoint), i);
    if (config_.relabel) {
      const int o = pick_offset(rng);
      const int ox = o / span - config_.max_offset;
      const int oy = o % span - config_.max_offset;
      const GoalPoint wp{t.position.x + ox * config_.cell_size, t.position.y + oy * config_.cell_size};
      const float r = static_cast<float>(low_reward(t.next_position, wp, config_.waypoint_radius));
      apply(key(t.position, wp), t.action, r, r == 0.0f, key(t.next_position, wp),
            within_key_range(t.next_position, wp), i);
    }
  }
  table_.tick();
  shared_.tick();
}

void LowLearner::write(std::ostream& out) const {
  table_.write(out);
  shared_.write(out);
  binary::put_vector(out, trained_);
}

void LowLearner::read(std::istream& in) {
  TwinQTable t, sh;
  t.read(in);
  sh.read(in);
  auto trained = binary::get_vector<std::uint16_t>(in);
  if (t.rows() != table_.rows() || t.cols() != table_.cols() || sh.rows() != shared_.rows() ||
      sh.cols() != shared_.cols() || trained.size() != trained_.size()) {
    throw std::runtime_error("low-level table shape does not match the environment");
  }
  table_ = std::move(t);
  shared_ = std::move(sh);
  trained_ = std::move(trained);
}

}  // namespace sse

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sse/env.hpp"
#include "sse/goal_space.hpp"
#include "sse/high_level.hpp"
#include "sse/landmark_graph.hpp"
#include "sse/low_level.hpp"

namespace sse {

/// Fixed-capacity FIFO that overwrites its oldest element when full.
template <class T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(const T& item) {
    if (capacity_ == 0) return;
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[head_] = item;
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th oldest element.
  const T& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  const T& sample(Rng& rng) const {
    return items_[std::uniform_int_distribution<std::size_t>(0, items_.size() - 1)(rng)];
  }

  void clear() {
    items_.clear();
    head_ = 0;
  }

  // Raw access for serialization.
  std::size_t head() const { return head_; }
  const std::vector<T>& storage() const { return items_; }
  void restore(std::vector<T> items, std::size_t head) {
    if (items.size() > capacity_ || (head != 0 && head >= items.size())) {
      throw std::runtime_error("inconsistent ring buffer state");
    }
    items_ = std::move(items);
    head_ = head;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

/// High-level replay split into reward-bearing successes and everything else.
class HighBuffer {
 public:
  explicit HighBuffer(std::size_t total_capacity = 2'500'000)
      : success_(total_capacity / 2), zero_(total_capacity - total_capacity / 2) {}

  static bool belongs_to_success_half(const HighTransition& t) { return t.success && t.reward > 0.0; }

  void push(const HighTransition& t) { (belongs_to_success_half(t) ? success_ : zero_).push(t); }

  /// Half the batch from each half when both are nonempty, otherwise all of
  /// it from the nonempty one. Draws with replacement.
  std::vector<HighTransition> sample(std::size_t batch, Rng& rng) const;

  std::size_t size() const { return success_.size() + zero_.size(); }
  bool empty() const { return size() == 0; }
  const RingBuffer<HighTransition>& success_half() const { return success_; }
  const RingBuffer<HighTransition>& zero_half() const { return zero_; }
  RingBuffer<HighTransition>& success_half() { return success_; }
  RingBuffer<HighTransition>& zero_half() { return zero_; }

 private:
  RingBuffer<HighTransition> success_;
  RingBuffer<HighTransition> zero_;
};

/// Exploration-ratio and epsilon schedules.
struct Schedules {
  double eta_target = 0.1;
  double eta_decay = 0.05;
  int iterations_elapsed = 0;

  double epsilon_min = 0.1;
  double epsilon_decay_fraction = 0.5;  // of total training episodes
  long total_episodes = 1;
  long episodes_elapsed = 0;

  double eta_current() const { return std::max(eta_target, 1.0 - eta_decay * iterations_elapsed); }
  /// Linear from 1 to epsilon_min over the decay window, then flat.
  double epsilon() const;
};

/// Exploration with probability eta_current, else the high-level policy.
Behavior choose_behavior_policy(const Schedules& schedules, Rng& rng);

struct TrainingConfig {
  EnvConfig env;
  double grid_spacing = 2.0;  // landmark spacing and goal-space cell size
  double lambda = 2.0;
  double c_dist = 5.0;
  double eta = 0.1;
  double epsilon_min = 0.1;
  double epsilon_decay_fraction = 0.5;
  int iterations = 200;
  int episodes_per_iteration = 10;
  int high_batches = 100;
  int low_batches = 500;
  int batch_size = 1024;
  std::size_t high_capacity = 2'500'000;
  std::size_t low_capacity = 2'500'000;
  HighConfig high;
  LowConfig low;
  double low_noise = 0.2;
  EuclideanTerm euclidean = EuclideanTerm::negated;
  std::size_t stuck_window = 500;
  double motion_epsilon = 0.05;
  int max_decisions = 100;
  int eval_episodes = 10;
  int eval_every = 1;

  // Ablations.
  bool no_refinement = false;
  bool fixed_steps = false;
  int fixed_step_count = 10;
  ExploreWeights weights;
  bool use_exploration = true;

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
  long total_episodes() const { return static_cast<long>(iterations) * episodes_per_iteration; }
};

struct IterationReport {
  int iteration = 0;
  long episodes = 0;  // cumulative
  double success_rate = 0.0;
  double coverage = 0.0;
  double mean_decisions = 0.0;
  double mean_kt = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  double eval_success = std::numeric_limits<double>::quiet_NaN();
};

struct EvalReport {
  double success_rate = 0.0;
  int episodes = 0;
  std::vector<int> successful_decisions;  // decision count of each successful episode
  EpisodeResult last;                     // with trajectory
};

/// Largest total reward one episode can collect.
double max_episode_reward(const EnvConfig& env);

/// The whole training loop for one seed: buffers, counters, schedules and
/// both learners.
class Trainer {
 public:
  Trainer(TrainingConfig config, std::uint64_t seed);

  const TrainingConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  int iteration() const { return schedules_.iterations_elapsed; }

  IterationReport run_iteration();

  /// Greedy episodes (epsilon 0, no low-level noise, no learning). Uses its
  /// own RNG streams so the training streams are untouched.
  EvalReport evaluate(int episodes, std::uint64_t stream) const;

  ExecutionContext context(bool training) const;

  const LandmarkGraph& graph() const { return graph_; }
  const GridPartition& partition() const { return partition_; }
  GridPartition& partition() { return partition_; }
  const LowLearner& low() const { return low_; }
  LowLearner& low() { return low_; }
  const HighPolicy& high() const { return high_; }
  HighPolicy& high() { return high_; }
  const Schedules& schedules() const { return schedules_; }
  const HighBuffer& high_buffer() const { return high_buffer_; }
  const RingBuffer<LowTransition>& low_buffer() const { return low_buffer_; }
  const EpisodeResult& last_episode() const { return last_episode_; }

  void write_checkpoint(std::ostream& out) const;
  /// Replaces the trainer state. Throws std::runtime_error when the
  /// checkpoint was written for a different configuration.
  void read_checkpoint(std::istream& in);

  /// Text echo of everything that shapes the run; stored in checkpoints.
  std::string config_fingerprint() const;

 private:
  void absorb(const EpisodeResult& episode, long index);

  TrainingConfig config_;
  std::uint64_t seed_;
  LandmarkGraph graph_;
  GridPartition partition_;
  LowLearner low_;
  HighPolicy high_;
  Schedules schedules_;
  HighBuffer high_buffer_;
  RingBuffer<LowTransition> low_buffer_;
  Rng env_rng_;
  Rng policy_rng_;
  Rng update_rng_;
  double reward_cap_ = 0.0;
  EpisodeResult last_episode_;
};

/// Independent stream of a run seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace sse

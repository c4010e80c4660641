#include "sse/goal_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sse {

namespace {

// Index along one axis with boundary ties resolved downward.
int axis_index(double v, double lo, double size, int count) {
  const double u = (v - lo) / size;
  const int idx = static_cast<int>(std::ceil(u)) - 1;
  return std::clamp(idx, 0, count - 1);
}

}  // namespace

GridPartition::GridPartition(Box bounds, double cell_size)
    : bounds_(bounds), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (!bounds.nondegenerate()) throw std::invalid_argument("degenerate goal-space bounds");
  // Tolerate floating noise so that e.g. 20/2 yields exactly 10 columns.
  cols_ = static_cast<int>(std::ceil(bounds.width() / cell_size - 1e-9));
  rows_ = static_cast<int>(std::ceil(bounds.height() / cell_size - 1e-9));
  cells_.assign(static_cast<std::size_t>(cols_ * rows_), CellStats{});
  admissible_.assign(cells_.size(), true);
}

int GridPartition::cell_of(GoalPoint p) const {
  if (!bounds_.contains(p) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw std::domain_error("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") outside goal space");
  }
  const int col = axis_index(p.x, bounds_.x_min, cell_size_, cols_);
  const int row = axis_index(p.y, bounds_.y_min, cell_size_, rows_);
  return row * cols_ + col;
}

Box GridPartition::cell_box(int m) const {
  const int col = m % cols_;
  const int row = m / cols_;
  Box b;
  b.x_min = bounds_.x_min + col * cell_size_;
  b.y_min = bounds_.y_min + row * cell_size_;
  b.x_max = std::min(bounds_.x_max, b.x_min + cell_size_);
  b.y_max = std::min(bounds_.y_max, b.y_min + cell_size_);
  return b;
}

void GridPartition::record_episode_visits(std::span<const int> cells) {
  std::vector<int> unique(cells.begin(), cells.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (int m : unique) {
    if (m < 0 || m >= cell_count()) throw std::out_of_range("cell index out of range");
    ++cells_[static_cast<std::size_t>(m)].visits;
  }
}

void GridPartition::record_subgoal_failure(GoalPoint terminal_position, GoalPoint subgoal) {
  const int m = cell_of(terminal_position);
  // Subgoals may be sampled anywhere in free space; clamp into the box before
  // indexing so an out-of-box subgoal still counts as "another cell".
  const GoalPoint clamped{std::clamp(subgoal.x, bounds_.x_min, bounds_.x_max),
                          std::clamp(subgoal.y, bounds_.y_min, bounds_.y_max)};
  if (count_same_cell_failures || cell_of(clamped) != m) {
    ++cells_[static_cast<std::size_t>(m)].fails;
  }
}

double GridPartition::failure_ratio(int m) const {
  const CellStats& s = cells_[static_cast<std::size_t>(m)];
  if (s.visits == 0) return 0.0;
  return std::min(1.0, static_cast<double>(s.fails) / static_cast<double>(s.visits));
}

int GridPartition::novel_cell(Rng& rng) const {
  std::uint64_t best = UINT64_MAX;
  std::vector<int> ties;
  for (int m = 0; m < cell_count(); ++m) {
    if (!admissible_[static_cast<std::size_t>(m)]) continue;
    const std::uint64_t v = cells_[static_cast<std::size_t>(m)].visits;
    if (v < best) {
      best = v;
      ties.clear();
    }
    if (v == best) ties.push_back(m);
  }
  if (ties.empty()) throw std::logic_error("every grid cell is blocked by walls");
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties[pick(rng)];
}

std::optional<GoalPoint> GridPartition::sample_in_cell(int m, std::span<const Box> walls,
                                                       Rng& rng, int attempts) const {
  const Box box = cell_box(m);
  for (int i = 0; i < attempts; ++i) {
    const GoalPoint p = uniform_point(box, rng);
    if (!inside_any(walls, p)) return p;
  }
  return std::nullopt;
}

void GridPartition::exclude_wall_cells(std::span<const Box> walls) {
  for (int m = 0; m < cell_count(); ++m) {
    admissible_[static_cast<std::size_t>(m)] = !inside_any(walls, cell_box(m).center());
  }
}

int GridPartition::admissible_count() const {
  return static_cast<int>(std::count(admissible_.begin(), admissible_.end(), true));
}

double GridPartition::coverage() const {
  int visited = 0;
  int total = 0;
  for (std::size_t m = 0; m < cells_.size(); ++m) {
    if (!admissible_[m]) continue;
    ++total;
    if (cells_[m].visits > 0) ++visited;
  }
  return total == 0 ? 0.0 : static_cast<double>(visited) / total;
}

}  // namespace sse

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sse/geometry.hpp"

namespace sse {

/// Per-cell episode statistics.
struct CellStats {
  std::uint64_t visits = 0;  // episodes that visited the cell
  std::uint64_t fails = 0;   // episodes that ended here after failing to leave
};

/// Tiling of the goal-space box into square cells of side `cell_size`.
///
/// Cells are indexed row-major from the lower-left corner: m = row * cols + col.
/// A point on a shared boundary belongs to the lower-index cell, so cell_of is
/// a pure function of the point. The last row/column is clipped to the box
/// when the extent is not a multiple of the cell size.
class GridPartition {
 public:
  GridPartition() = default;
  GridPartition(Box bounds, double cell_size);

  const Box& bounds() const { return bounds_; }
  double cell_size() const { return cell_size_; }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  int cell_count() const { return cols_ * rows_; }

  /// Throws std::domain_error for points outside the box.
  int cell_of(GoalPoint p) const;
  Box cell_box(int m) const;

  /// Increments the visit count of every distinct cell in `cells` once.
  void record_episode_visits(std::span<const int> cells);

  /// Counts a failure in the terminal cell when the subgoal lies in another
  /// cell (or always, when count_same_cell_failures is set).
  void record_subgoal_failure(GoalPoint terminal_position, GoalPoint subgoal);

  /// N_fail / N for the cell, 0 for unvisited cells.
  double failure_ratio(int m) const;

  /// Least-visited admissible cell, ties broken uniformly at random.
  /// Throws std::logic_error when no cell is admissible.
  int novel_cell(Rng& rng) const;

  /// Uniform point in the cell that lies outside every wall; nullopt after
  /// `attempts` rejections.
  std::optional<GoalPoint> sample_in_cell(int m, std::span<const Box> walls, Rng& rng,
                                          int attempts = 100) const;

  /// Marks cells whose center lies strictly inside a wall as inadmissible for
  /// novelty sampling.
  void exclude_wall_cells(std::span<const Box> walls);
  bool admissible(int m) const { return admissible_[static_cast<std::size_t>(m)]; }
  int admissible_count() const;

  /// Fraction of admissible cells visited at least once.
  double coverage() const;

  const CellStats& stats(int m) const { return cells_[static_cast<std::size_t>(m)]; }
  CellStats& stats(int m) { return cells_[static_cast<std::size_t>(m)]; }
  std::span<const CellStats> all_stats() const { return cells_; }

  bool count_same_cell_failures = false;

 private:
  Box bounds_{};
  double cell_size_ = 1.0;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<CellStats> cells_;
  std::vector<bool> admissible_;
};

}  // namespace sse

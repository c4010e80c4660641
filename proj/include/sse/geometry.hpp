#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace sse {

using Rng = std::mt19937_64;

/// A point of the 2D goal space (agent position plane).
struct GoalPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GoalPoint&, const GoalPoint&) = default;
};

/// Planar displacement commanded to the point-mass agent for one step.
struct Action {
  double dx = 0.0;
  double dy = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

inline double distance(GoalPoint a, GoalPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned box. Used for goal-space bounds, walls, slip zones and cells.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool nondegenerate() const { return x_max > x_min && y_max > y_min; }

  bool contains(GoalPoint p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  bool strictly_contains(GoalPoint p) const {
    return p.x > x_min && p.x < x_max && p.y > y_min && p.y < y_max;
  }
  GoalPoint center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// True iff the closed segment [a,b] meets the open interior of `box`.
/// Segments running along a face or touching a corner do not count.
bool segment_crosses_interior(GoalPoint a, GoalPoint b, const Box& box);

bool inside_any(std::span<const Box> boxes, GoalPoint p);

/// No wall interior is crossed by the segment [a,b].
bool segment_clear(GoalPoint a, GoalPoint b, std::span<const Box> walls);

GoalPoint uniform_point(const Box& box, Rng& rng);

/// Shortest text that parses back to exactly `v`; "nan", "inf", "-inf" for
/// non-finite values.
std::string format_number(double v);

}  // namespace sse

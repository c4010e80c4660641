#include "sse/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace sse {

bool segment_crosses_interior(GoalPoint a, GoalPoint b, const Box& box) {
  // Liang-Barsky clip against the closed box, then test the midpoint of the
  // clipped piece: for a convex set, the open clipped segment lies in the
  // interior iff any of its points does.
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - box.x_min, box.x_max - a.x, a.y - box.y_min, box.y_max - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return false;
  }
  const double tm = 0.5 * (t0 + t1);
  return box.strictly_contains({a.x + tm * dx, a.y + tm * dy});
}

bool inside_any(std::span<const Box> boxes, GoalPoint p) {
  return std::any_of(boxes.begin(), boxes.end(),
                     [&](const Box& b) { return b.strictly_contains(p); });
}

bool segment_clear(GoalPoint a, GoalPoint b, std::span<const Box> walls) {
  return std::none_of(walls.begin(), walls.end(),
                      [&](const Box& w) { return segment_crosses_interior(a, b, w); });
}

GoalPoint uniform_point(const Box& box, Rng& rng) {
  std::uniform_real_distribution<double> ux(box.x_min, box.x_max);
  std::uniform_real_distribution<double> uy(box.y_min, box.y_max);
  const double x = ux(rng);
  return {x, uy(rng)};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace sse

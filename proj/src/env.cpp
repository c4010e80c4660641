#include "sse/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace sse {

namespace {

constexpr double kWallGap = 1e-6;

// Builtin walls touching the outer boundary extend one unit past it, so that
// boundary points are strictly inside them.
Box wall(double x0, double y0, double x1, double y1) { return Box{x0, y0, x1, y1}; }

double move_axis(double from, double delta, double lo, double hi,
                 const std::vector<Box>& walls, double other, bool along_x) {
  double to = from + delta;
  for (const Box& w : walls) {
    const double o_lo = along_x ? w.y_min : w.x_min;
    const double o_hi = along_x ? w.y_max : w.x_max;
    if (!(other > o_lo && other < o_hi)) continue;
    const double w_lo = along_x ? w.x_min : w.y_min;
    const double w_hi = along_x ? w.x_max : w.y_max;
    if (delta > 0.0 && from <= w_lo && to > w_lo) {
      to = std::max(from, w_lo - kWallGap);
    } else if (delta < 0.0 && from >= w_hi && to < w_hi) {
      to = std::min(from, w_hi + kWallGap);
    }
  }
  return std::clamp(to, lo, hi);
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::single_goal: return "single_goal";
    case TaskKind::key_chest: return "key_chest";
    case TaskKind::double_key_chest: return "double_key_chest";
    case TaskKind::double_goal: return "double_goal";
  }
  return "?";
}

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "single_goal") return TaskKind::single_goal;
  if (name == "key_chest") return TaskKind::key_chest;
  if (name == "double_key_chest") return TaskKind::double_key_chest;
  if (name == "double_goal") return TaskKind::double_goal;
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::vector<GoalPoint> Task::goal_points() const {
  switch (kind) {
    case TaskKind::single_goal: return {points.at(0)};
    case TaskKind::key_chest: return {points.at(1)};
    case TaskKind::double_key_chest: return {points.at(2)};
    case TaskKind::double_goal: return {points.at(0), points.at(1)};
  }
  return {};
}

namespace {

std::size_t expected_points(TaskKind kind) {
  switch (kind) {
    case TaskKind::single_goal: return 1;
    case TaskKind::key_chest: return 2;
    case TaskKind::double_key_chest: return 3;
    case TaskKind::double_goal: return 2;
  }
  return 0;
}

}  // namespace

void EnvConfig::validate() const {
  if (!bounds.nondegenerate()) throw ConfigError("env '" + name + "': degenerate bounds");
  if (horizon < 1) throw ConfigError("env '" + name + "': horizon must be >= 1");
  if (!(success_threshold > 0.0)) throw ConfigError("env '" + name + "': success_threshold must be > 0");
  if (!(max_action > 0.0)) throw ConfigError("env '" + name + "': max_action must be > 0");
  if (task.points.size() != expected_points(task.kind)) {
    throw ConfigError("env '" + name + "': task " + std::string(to_string(task.kind)) +
                      " needs " + std::to_string(expected_points(task.kind)) + " points");
  }
  if (!free(start)) throw ConfigError("env '" + name + "': start is not in free space");
  for (const GoalPoint& p : task.points) {
    if (!free(p)) throw ConfigError("env '" + name + "': task point is not in free space");
  }
  for (const SlipZone& z : slip_zones) {
    if (!(z.stick_probability >= 0.0 && z.stick_probability <= 1.0)) {
      throw ConfigError("env '" + name + "': slip probability outside [0,1]");
    }
  }
}

EnvState reset(const EnvConfig& config) {
  EnvState s;
  s.position = config.start;
  s.flags = advance_flags(0, config.start, config);
  return s;
}

std::uint32_t advance_flags(std::uint32_t flags, GoalPoint position, const EnvConfig& config) {
  const auto& pts = config.task.points;
  const double thr = config.success_threshold;
  auto near = [&](std::size_t i) { return distance(position, pts[i]) < thr; };
  switch (config.task.kind) {
    case TaskKind::single_goal:
      if (near(0)) flags |= 1u;
      break;
    case TaskKind::key_chest:
      if (near(0)) flags |= 1u;
      if ((flags & 1u) && near(1)) flags |= 2u;
      break;
    case TaskKind::double_key_chest:
      if (near(0)) flags |= 1u;
      if ((flags & 1u) && near(1)) flags |= 2u;
      if ((flags & 3u) == 3u && near(2)) flags |= 4u;
      break;
    case TaskKind::double_goal:
      if (near(0)) flags |= 1u;
      if (near(1)) flags |= 2u;
      break;
  }
  return flags;
}

double reward_of(const EnvState& before, const EnvState& after, const EnvConfig& config) {
  const std::uint32_t fresh = after.flags & ~before.flags;
  if (fresh == 0) return 0.0;
  switch (config.task.kind) {
    case TaskKind::single_goal: return 1.0;
    case TaskKind::key_chest: return (fresh & 2u) ? 5.0 : 1.0;
    case TaskKind::double_key_chest: return (fresh & 4u) ? 5.0 : 1.0 * std::popcount(fresh);
    case TaskKind::double_goal: return after.flags == 3u ? 5.0 : 1.0;
  }
  return 0.0;
}

StepResult step(const EnvState& state, Action action, const EnvConfig& config, Rng& rng) {
  if (!std::isfinite(action.dx) || !std::isfinite(action.dy)) {
    throw std::invalid_argument("action is not finite");
  }
  const double limit = config.max_action * (1.0 + 1e-12);
  if (std::abs(action.dx) > limit || std::abs(action.dy) > limit) {
    throw std::invalid_argument("action exceeds max_action");
  }
  if (state.t >= config.horizon) throw std::logic_error("step after the horizon");

  StepResult r;
  EnvState next = state;
  if (!next.stuck_in_slip) {
    for (const SlipZone& z : config.slip_zones) {
      if (z.area.contains(state.position)) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < z.stick_probability) next.stuck_in_slip = true;
        break;
      }
    }
  }
  if (!next.stuck_in_slip) {
    const Box& b = config.bounds;
    GoalPoint p = state.position;
    p.x = move_axis(p.x, action.dx, b.x_min, b.x_max, config.walls, p.y, true);
    p.y = move_axis(p.y, action.dy, b.y_min, b.y_max, config.walls, p.x, false);
    next.position = p;
  }
  next.flags = advance_flags(state.flags, next.position, config);
  next.t = state.t + 1;
  r.reward = reward_of(state, next, config);

  const std::uint32_t fresh = next.flags & ~state.flags;
  const std::uint32_t complete = config.task.complete_mask();
  switch (config.task.kind) {
    case TaskKind::single_goal:
    case TaskKind::double_goal: r.info.reached_goal = fresh != 0; break;
    case TaskKind::key_chest:
    case TaskKind::double_key_chest:
      r.info.reached_goal = (fresh & (1u << (config.task.points.size() - 1))) != 0;
      r.info.reached_key = (fresh & ~(1u << (config.task.points.size() - 1))) != 0;
      break;
  }
  r.task_complete = next.flags == complete;
  r.done = r.task_complete || next.t >= config.horizon;
  r.next_state = next;
  return r;
}

// ---------------------------------------------------------------------------
// Builtin maps.

std::vector<std::string> builtin_env_names() {
  return {"u_maze",   "pi_maze",          "complex",         "bottleneck", "double_bottleneck",
          "key_chest", "double_key_chest", "two_corridor_test"};
}

EnvConfig builtin_env(std::string_view name) {
  EnvConfig c;
  c.name = std::string(name);
  if (name == "u_maze") {
    c.bounds = {0, 0, 20, 20};
    c.walls = {wall(-1, 8, 14, 12)};
    c.start = {2, 2};
    c.task = {TaskKind::single_goal, {{2, 18}}};
    c.horizon = 600;
  } else if (name == "pi_maze") {
    c.bounds = {0, 0, 28, 28};
    c.walls = {wall(12, -1, 16, 22), wall(4, 8, 13, 12), wall(15, 8, 24, 12)};
    c.start = {6, 2};
    c.task = {TaskKind::single_goal, {{22, 2}}};
    c.horizon = 1000;
  } else if (name == "complex") {
    c.bounds = {0, 0, 36, 36};
    c.walls = {wall(8, -1, 12, 28),  wall(20, 8, 24, 37), wall(28, -1, 32, 14),
               wall(24, 20, 32, 24), wall(0, 32, 6, 37),  wall(12, 12, 18, 16)};
    c.start = {2, 2};
    c.task = {TaskKind::single_goal, {{34, 2}}};
    c.horizon = 2000;
  } else if (name == "bottleneck") {
    c.bounds = {0, 0, 20, 20};
    // One passage of width 2 at x in [9, 11]; each slip patch covers the
    // four lattice positions of a single goal-space cell beside the walls.
    c.walls = {wall(-1, 8, 9, 12), wall(11, 8, 21, 12)};
    c.slip_zones = {{{6.5, 4.5, 8.5, 6.5}, 0.3},
                    {{11.5, 4.5, 13.5, 6.5}, 0.3},
                    {{6.5, 13.5, 8.5, 15.5}, 0.3},
                    {{11.5, 13.5, 13.5, 15.5}, 0.3}};
    c.start = {2, 2};
    c.task = {TaskKind::single_goal, {{10, 18}}};
    c.horizon = 600;
  } else if (name == "double_bottleneck") {
    c.bounds = {0, 0, 20, 36};
    c.walls = {wall(-1, 10, 8, 12), wall(10, 10, 21, 12), wall(-1, 24, 12, 26),
               wall(14, 24, 21, 26)};
    c.slip_zones = {{{5, 8, 13, 10}, 0.3}, {{9, 22, 17, 24}, 0.3}};
    c.start = {2, 2};
    c.task = {TaskKind::single_goal, {{18, 34}}};
    c.horizon = 1200;
  } else if (name == "key_chest") {
    c.bounds = {-4, -4, 36, 36};
    c.walls = {wall(-5, 6, 28, 10), wall(4, 22, 37, 26)};
    c.start = {0, 0};
    c.task = {TaskKind::key_chest, {{0, 16}, {0, 32}}};
    c.horizon = 2000;
  } else if (name == "double_key_chest") {
    c.bounds = {-4, -4, 36, 36};
    c.walls = {wall(6, -5, 10, 24), wall(22, 8, 26, 37)};
    c.start = {0, 0};
    c.task = {TaskKind::double_key_chest, {{16, 32}, {16, 0}, {32, 0}}};
    c.horizon = 3000;
  } else if (name == "two_corridor_test") {
    c.bounds = {0, 0, 24, 16};
    c.walls = {wall(5, 6, 19, 12)};
    c.slip_zones = {{{6, -1, 18, 6}, 0.3}};
    c.start = {2, 4};
    c.task = {TaskKind::single_goal, {{22, 4}}};
    c.horizon = 600;
  } else {
    throw ConfigError("unknown builtin environment '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Declarative text format.

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> numbers(const std::string& text, std::size_t count, const std::string& where) {
  std::istringstream in(text);
  std::vector<double> out;
  double v = 0;
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.size() != count) {
    throw ConfigError(where + ": expected " + std::to_string(count) + " numbers, got '" + text + "'");
  }
  return out;
}

}  // namespace

EnvConfig parse_env_text(std::string_view text, const std::string& origin) {
  EnvConfig c;
  c.name = origin;
  bool have_bounds = false, have_start = false, have_task = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "name") {
      c.name = value;
    } else if (key == "bounds") {
      const auto v = numbers(value, 4, where);
      c.bounds = {v[0], v[1], v[2], v[3]};
      have_bounds = true;
    } else if (key == "wall") {
      const auto v = numbers(value, 4, where);
      c.walls.push_back({v[0], v[1], v[2], v[3]});
    } else if (key == "slip") {
      const auto v = numbers(value, 5, where);
      c.slip_zones.push_back({{v[0], v[1], v[2], v[3]}, v[4]});
    } else if (key == "start") {
      const auto v = numbers(value, 2, where);
      c.start = {v[0], v[1]};
      have_start = true;
    } else if (key == "task") {
      std::istringstream ts(value);
      std::string kind;
      ts >> kind;
      std::string rest;
      std::getline(ts, rest);
      try {
        c.task.kind = task_kind_from_string(kind);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
      const auto v = numbers(trim(rest), 2 * expected_points(c.task.kind), where);
      c.task.points.clear();
      for (std::size_t i = 0; i < v.size(); i += 2) c.task.points.push_back({v[i], v[i + 1]});
      have_task = true;
    } else if (key == "horizon") {
      c.horizon = static_cast<int>(numbers(value, 1, where)[0]);
    } else if (key == "success_threshold") {
      c.success_threshold = numbers(value, 1, where)[0];
    } else if (key == "max_action") {
      c.max_action = numbers(value, 1, where)[0];
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  if (!have_bounds) throw ConfigError(origin + ": missing 'bounds'");
  if (!have_start) throw ConfigError(origin + ": missing 'start'");
  if (!have_task) throw ConfigError(origin + ": missing 'task'");
  c.validate();
  return c;
}

EnvConfig load_env_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open env file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_env_text(ss.str(), path);
}

std::string env_to_text(const EnvConfig& c) {
  std::ostringstream o;
  auto nums = [&](std::initializer_list<double> vs) {
    for (double v : vs) o << ' ' << format_number(v);
    o << '\n';
  };
  o << "name = " << c.name << "\n";
  o << "bounds =";
  nums({c.bounds.x_min, c.bounds.y_min, c.bounds.x_max, c.bounds.y_max});
  for (const Box& w : c.walls) {
    o << "wall =";
    nums({w.x_min, w.y_min, w.x_max, w.y_max});
  }
  for (const SlipZone& z : c.slip_zones) {
    o << "slip =";
    nums({z.area.x_min, z.area.y_min, z.area.x_max, z.area.y_max, z.stick_probability});
  }
  o << "start =";
  nums({c.start.x, c.start.y});
  o << "task = " << to_string(c.task.kind);
  for (const GoalPoint& p : c.task.points) o << ' ' << format_number(p.x) << ' ' << format_number(p.y);
  o << "\n";
  o << "horizon = " << c.horizon << "\n";
  o << "success_threshold = " << format_number(c.success_threshold) << "\n";
  o << "max_action = " << format_number(c.max_action) << "\n";
  return o.str();
}

}  // namespace sse

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sse/env.hpp"

namespace sse {

struct RenderEdge {
  int src = 0;
  int dst = 0;
  double raw_cost = 0.0;
  double refined_cost = 0.0;
};

struct RenderCell {
  Box box;
  double visits = 0.0;
  double failure_ratio = 0.0;
};

/// Everything the renderers draw; each part may be empty.
struct RenderScene {
  EnvConfig env;
  std::vector<GoalPoint> nodes;
  std::vector<RenderEdge> edges;
  std::vector<std::vector<GoalPoint>> paths;  // planned waypoints, one per decision
  std::vector<GoalPoint> trajectory;
  std::vector<RenderCell> cells;
};

/// Walls, slip zones, graph edges colored by refined cost, planned paths and
/// the trajectory.
std::string render_maze_svg(const RenderScene& scene);

/// Cells shaded by visit count with a red failure-ratio overlay, walls on top.
std::string render_heatmap_svg(const RenderScene& scene);

/// Reads env.txt, graph_nodes.csv, graph_edges.csv, paths.csv,
/// trajectory.csv and grid.csv from a run directory. Missing files raise a
/// std::runtime_error naming the file.
RenderScene load_scene(const std::filesystem::path& run_dir);

/// Writes maze.svg and heatmap.svg next to the artifacts.
void render_run_dir(const std::filesystem::path& run_dir);

}  // namespace sse

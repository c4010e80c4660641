#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sse/env.hpp"
#include "sse/goal_space.hpp"
#include "sse/high_level.hpp"
#include "sse/landmark_graph.hpp"
#include "sse/low_level.hpp"

namespace sse {

// CSV exports of a run. Every writer emits a header row and prints doubles
// in shortest round-trip form so files parse back exactly.

/// m,x_lo,y_lo,visits,fails,ratio
void write_grid_csv(std::ostream& out, const GridPartition& partition);

/// id,x,y
void write_graph_nodes_csv(std::ostream& out, const LandmarkGraph& graph);

/// src,dst,raw_cost,refined_cost over every directed graph edge.
void write_graph_edges_csv(std::ostream& out, const LandmarkGraph& graph, const RawCostFn& raw_cost,
                           const GridPartition* partition, double c_dist);

/// decision,cell,step,flags,subgoal_x,subgoal_y,source,path_length,k,success,reward
void write_decisions_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions);

/// decision,index,x,y: the planned waypoints of every decision.
void write_paths_csv(std::ostream& out, const std::vector<DecisionRecord>& decisions);

/// t,x,y,reward,flags
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& trajectory);

/// x,y,value: best low-level value from each free lattice position toward
/// `waypoint` (positions out of the value table's offset range are skipped).
void write_low_heatmap_csv(std::ostream& out, const LowLearner& low, const EnvConfig& env, GoalPoint waypoint);

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header column; throws std::runtime_error when absent.
  std::size_t column(const std::string& name) const;
};

/// Throws std::runtime_error naming the file when it is missing or malformed.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sse

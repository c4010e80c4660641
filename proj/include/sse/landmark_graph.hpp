#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sse/geometry.hpp"
#include "sse/goal_space.hpp"

namespace sse {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// How the Euclidean distance enters the hybrid edge cost.
///   negated: log_g(1 + (1-g) * -d_E), the same pessimistic-value convention as
///            the Q^l term, giving "expected steps at unit speed".
///   literal: log_g(1 + (1-g) * d_E) as printed; negative for d_E > 0, so the
///            combined cost is floored at zero.
enum class EuclideanTerm { negated, literal };

struct EdgeCostParams {
  double gamma_low = 0.99;
  int horizon = 600;
  EuclideanTerm euclidean = EuclideanTerm::negated;
};

/// Steps-to-reach implied by a value of an all-(-1)-reward policy:
/// log_gamma(1 + (1-gamma) * q). A value below the geometric bound is clamped
/// to the horizon-limited floor -(1-gamma^H)/(1-gamma).
double value_to_steps(double q, double gamma, int horizon);

/// -(1 - gamma^k) / (1 - gamma): value of reaching after k unit-cost steps.
double steps_to_value(double k, double gamma);

/// Hybrid edge cost: mean of the Q^l step estimate and the Euclidean term.
double edge_cost(GoalPoint v1, GoalPoint v2, double q_low, const EdgeCostParams& params);

/// Failure-aware refinement: raw * max(1, c_dist * ratio_fail).
double refined_cost(double raw_cost, double failure_ratio, double c_dist);

/// Plain adjacency-list digraph with nonnegative weights.
struct WeightedDigraph {
  explicit WeightedDigraph(int n = 0) : out(static_cast<std::size_t>(n)) {}
  int size() const { return static_cast<int>(out.size()); }
  void add_edge(int from, int to, double cost) {
    out[static_cast<std::size_t>(from)].emplace_back(to, cost);
  }
  std::vector<std::vector<std::pair<int, double>>> out;
};

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<int> prev;  // -1 for the source and unreachable nodes

  /// Node sequence source..target inclusive; empty when unreachable.
  std::vector<int> path_to(int target) const;
};

/// Single-source Dijkstra. Ties resolve to the lower node index.
ShortestPaths dijkstra(const WeightedDigraph& graph, int source);

struct WaypointPath {
  std::vector<GoalPoint> waypoints;  // excludes the start, ends at the subgoal
  std::vector<int> node_ids;         // graph node per waypoint, -1 for the subgoal
  double total_cost = 0.0;           // sum of refined costs along the graph part
  bool fallback = false;             // subgoal unreachable; appended after nearest node
};

class PlannerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw (pre-refinement) cost of the directed edge from -> to.
using RawCostFn = std::function<double(const GoalPoint& from, const GoalPoint& to)>;

/// Grid-landmark graph with geometric adjacency and learned, lazily evaluated
/// edge costs.
class LandmarkGraph {
 public:
  LandmarkGraph() = default;

  /// Arbitrary node set; nodes are adjacent when within `neighbor_radius` and
  /// the straight segment between them avoids every wall interior.
  LandmarkGraph(std::vector<GoalPoint> nodes, std::vector<Box> walls, double neighbor_radius);

  /// Lattice {(i*spacing, j*spacing)} inside `bounds`, including both boundary
  /// lines, minus nodes strictly inside a wall. Radius 1.5 * spacing.
  static LandmarkGraph grid(const Box& bounds, double spacing, std::vector<Box> walls);

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<GoalPoint>& nodes() const { return nodes_; }
  const GoalPoint& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& neighbors(int i) const { return adjacency_[static_cast<std::size_t>(i)]; }
  const std::vector<Box>& walls() const { return walls_; }
  double neighbor_radius() const { return radius_; }
  int edge_count() const;

  /// Graph nodes attachable to `p`: within the radius, segment wall-free.
  std::vector<int> attachable(GoalPoint p) const;

  /// The landmark graph plus the start (index size()) and the subgoal
  /// (index size()+1), with refined costs on every edge. The refinement
  /// multiplier uses the destination's cell. `partition` may be null (no
  /// refinement).
  WeightedDigraph augmented(GoalPoint start, GoalPoint subgoal, const RawCostFn& raw_cost,
                            const GridPartition* partition, double c_dist) const;

  /// Dijkstra waypoint path from start to subgoal. If the subgoal cannot be
  /// reached through the graph, returns the path to the reachable node
  /// nearest to the subgoal with the subgoal appended. Throws PlannerError
  /// when the start attaches to no node and not directly to the subgoal.
  WaypointPath plan_path(GoalPoint start, GoalPoint subgoal, const RawCostFn& raw_cost,
                         const GridPartition* partition, double c_dist) const;

 private:
  std::vector<GoalPoint> nodes_;
  std::vector<Box> walls_;
  double radius_ = 0.0;
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace sse

#include "sse/landmark_graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <queue>

namespace sse {

namespace {

void warn_clamped_value(double q) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::clog << "warning: Q^l value " << q
              << " below the geometric bound; clamped to the horizon floor\n";
  }
}

}  // namespace

double steps_to_value(double k, double gamma) { return -(1.0 - std::pow(gamma, k)) / (1.0 - gamma); }

double value_to_steps(double q, double gamma, int horizon) {
  q = std::min(q, 0.0);
  double arg = 1.0 + (1.0 - gamma) * q;
  if (arg <= 0.0) {
    warn_clamped_value(q);
    arg = 1.0 + (1.0 - gamma) * steps_to_value(horizon, gamma);
  }
  return std::log(arg) / std::log(gamma);
}

double edge_cost(GoalPoint v1, GoalPoint v2, double q_low, const EdgeCostParams& params) {
  const double gamma = params.gamma_low;
  const double q_steps = value_to_steps(q_low, gamma, params.horizon);
  const double d = distance(v1, v2);
  if (params.euclidean == EuclideanTerm::literal) {
    const double e = std::log(1.0 + (1.0 - gamma) * d) / std::log(gamma);
    return std::max(0.0, 0.5 * (q_steps + e));
  }
  return 0.5 * (q_steps + value_to_steps(-d, gamma, params.horizon));
}

double refined_cost(double raw_cost, double failure_ratio, double c_dist) {
  return raw_cost * std::max(1.0, c_dist * failure_ratio);
}

std::vector<int> ShortestPaths::path_to(int target) const {
  std::vector<int> path;
  if (!std::isfinite(dist[static_cast<std::size_t>(target)])) return path;
  for (int v = target; v != -1; v = prev[static_cast<std::size_t>(v)]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

ShortestPaths dijkstra(const WeightedDigraph& graph, int source) {
  const auto n = static_cast<std::size_t>(graph.size());
  ShortestPaths sp;
  sp.dist.assign(n, kInfiniteCost);
  sp.prev.assign(n, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  sp.dist[static_cast<std::size_t>(source)] = 0.0;
  open.emplace(0.0, source);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > sp.dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& [v, w] : graph.out[static_cast<std::size_t>(u)]) {
      if (!std::isfinite(w)) continue;
      const double nd = d + w;
      auto& dv = sp.dist[static_cast<std::size_t>(v)];
      if (nd < dv) {
        dv = nd;
        sp.prev[static_cast<std::size_t>(v)] = u;
        open.emplace(nd, v);
      }
    }
  }
  return sp;
}

LandmarkGraph::LandmarkGraph(std::vector<GoalPoint> nodes, std::vector<Box> walls,
                             double neighbor_radius)
    : nodes_(std::move(nodes)), walls_(std::move(walls)), radius_(neighbor_radius) {
  adjacency_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      if (i == j) continue;
      if (distance(nodes_[i], nodes_[j]) <= radius_ && segment_clear(nodes_[i], nodes_[j], walls_)) {
        adjacency_[i].push_back(static_cast<int>(j));
      }
    }
  }
}

LandmarkGraph LandmarkGraph::grid(const Box& bounds, double spacing, std::vector<Box> walls) {
  if (!(spacing > 0.0)) throw std::invalid_argument("landmark spacing must be positive");
  if (!bounds.nondegenerate()) throw std::invalid_argument("degenerate goal-space bounds");
  const double eps = 1e-9;
  const int i0 = static_cast<int>(std::ceil(bounds.x_min / spacing - eps));
  const int i1 = static_cast<int>(std::floor(bounds.x_max / spacing + eps));
  const int j0 = static_cast<int>(std::ceil(bounds.y_min / spacing - eps));
  const int j1 = static_cast<int>(std::floor(bounds.y_max / spacing + eps));
  std::vector<GoalPoint> nodes;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const GoalPoint p{i * spacing, j * spacing};
      if (!inside_any(walls, p)) nodes.push_back(p);
    }
  }
  if (nodes.empty()) throw std::invalid_argument("no admissible landmark nodes");
  return LandmarkGraph(std::move(nodes), std::move(walls), 1.5 * spacing);
}

int LandmarkGraph::edge_count() const {
  int n = 0;
  for (const auto& a : adjacency_) n += static_cast<int>(a.size());
  return n;
}

std::vector<int> LandmarkGraph::attachable(GoalPoint p) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const GoalPoint& v = nodes_[static_cast<std::size_t>(i)];
    if (distance(p, v) <= radius_ && segment_clear(p, v, walls_)) out.push_back(i);
  }
  return out;
}

WeightedDigraph LandmarkGraph::augmented(GoalPoint start, GoalPoint subgoal,
                                         const RawCostFn& raw_cost,
                                         const GridPartition* partition, double c_dist) const {
  const int n = size();
  const int s = n;
  const int t = n + 1;
  WeightedDigraph g(n + 2);

  auto ratio_at = [&](GoalPoint p) {
    if (partition == nullptr) return 0.0;
    const Box& b = partition->bounds();
    const GoalPoint q{std::clamp(p.x, b.x_min, b.x_max), std::clamp(p.y, b.y_min, b.y_max)};
    return partition->failure_ratio(partition->cell_of(q));
  };
  auto refined = [&](GoalPoint from, GoalPoint to, double ratio) {
    return refined_cost(raw_cost(from, to), ratio, c_dist);
  };

  std::vector<double> node_ratio(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) node_ratio[static_cast<std::size_t>(i)] = ratio_at(node(i));

  for (int i = 0; i < n; ++i) {
    for (int j : neighbors(i)) {
      g.add_edge(i, j, refined(node(i), node(j), node_ratio[static_cast<std::size_t>(j)]));
    }
  }
  for (int j : attachable(start)) {
    g.add_edge(s, j, refined(start, node(j), node_ratio[static_cast<std::size_t>(j)]));
  }
  const double subgoal_ratio = ratio_at(subgoal);
  for (int j : attachable(subgoal)) {
    g.add_edge(j, t, refined(node(j), subgoal, subgoal_ratio));
  }
  if (distance(start, subgoal) <= radius_ && segment_clear(start, subgoal, walls_)) {
    g.add_edge(s, t, refined(start, subgoal, subgoal_ratio));
  }
  return g;
}

WaypointPath LandmarkGraph::plan_path(GoalPoint start, GoalPoint subgoal,
                                      const RawCostFn& raw_cost,
                                      const GridPartition* partition, double c_dist) const {
  const int n = size();
  const int s = n;
  const int t = n + 1;
  const WeightedDigraph g = augmented(start, subgoal, raw_cost, partition, c_dist);
  if (g.out[static_cast<std::size_t>(s)].empty()) {
    throw PlannerError("start cannot be attached to the landmark graph");
  }
  const ShortestPaths sp = dijkstra(g, s);

  WaypointPath path;
  std::vector<int> ids;
  if (std::isfinite(sp.dist[static_cast<std::size_t>(t)])) {
    ids = sp.path_to(t);
    path.total_cost = sp.dist[static_cast<std::size_t>(t)];
  } else {
    int best = -1;
    double best_d = kInfiniteCost;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(sp.dist[static_cast<std::size_t>(i)])) continue;
      const double d = distance(node(i), subgoal);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ids = sp.path_to(best);
    ids.push_back(t);
    path.total_cost = sp.dist[static_cast<std::size_t>(best)];
    path.fallback = true;
  }
  for (std::size_t k = 1; k < ids.size(); ++k) {
    const int id = ids[k];
    if (id == t) {
      path.waypoints.push_back(subgoal);
      path.node_ids.push_back(-1);
    } else {
      path.waypoints.push_back(node(id));
      path.node_ids.push_back(id);
    }
  }
  return path;
}

}  // namespace sse

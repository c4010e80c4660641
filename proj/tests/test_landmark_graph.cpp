#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <tuple>

#include "oracles.hpp"
#include "sse/landmark_graph.hpp"

namespace {

using sse::GoalPoint;

// log_gamma(1 + (1 - gamma) * q), written out independently of the library.
double steps_of(double q, double gamma) { return std::log(1.0 + (1.0 - gamma) * q) / std::log(gamma); }

// Raw costs looked up by exact endpoint coordinates; unknown pairs are expensive.
struct CostTable {
  std::map<std::tuple<double, double, double, double>, double> cost;
  double fallback = 1000.0;

  void set(GoalPoint a, GoalPoint b, double c) { cost[{a.x, a.y, b.x, b.y}] = c; }
  sse::RawCostFn fn() const {
    return [this](const GoalPoint& a, const GoalPoint& b) {
      if (a == b) return 0.0;
      const auto it = cost.find({a.x, a.y, b.x, b.y});
      return it == cost.end() ? fallback : it->second;
    };
  }
};

TEST(EdgeCost, QTermRecoversStepCount) {
  const sse::EdgeCostParams p{0.99, 600, sse::EuclideanTerm::negated};
  for (int k = 1; k <= 200; ++k) {
    const double q = -(1.0 - std::pow(0.99, k)) / 0.01;
    EXPECT_NEAR(sse::value_to_steps(q, 0.99, 600), k, 1e-6);
  }
  EXPECT_EQ(p.gamma_low, 0.99);
}

TEST(EdgeCost, BothTermsAtTenStepsGiveTen) {
  const sse::EdgeCostParams p{0.99, 600, sse::EuclideanTerm::negated};
  const double q = -(1.0 - std::pow(0.99, 10)) / 0.01;
  EXPECT_NEAR(q, -9.56179, 1e-5);
  const double d = -q;  // the Euclidean term then also reads 10 steps
  EXPECT_NEAR(sse::edge_cost({0, 0}, {d, 0}, q, p), 10.0, 1e-6);
}

TEST(EdgeCost, ZeroValueAndZeroDistanceIsFree) {
  const sse::EdgeCostParams p{};
  EXPECT_DOUBLE_EQ(sse::edge_cost({3, 3}, {3, 3}, 0.0, p), 0.0);
}

TEST(EdgeCost, IsTheMeanOfBothTerms) {
  const sse::EdgeCostParams p{0.99, 600, sse::EuclideanTerm::negated};
  const double q4 = -(1.0 - std::pow(0.99, 4)) / 0.01;
  const double d8 = (1.0 - std::pow(0.99, 8)) / 0.01;
  EXPECT_NEAR(steps_of(q4, 0.99), 4.0, 1e-9);
  EXPECT_NEAR(steps_of(-d8, 0.99), 8.0, 1e-9);
  EXPECT_NEAR(sse::edge_cost({0, 0}, {0, d8}, q4, p), 6.0, 1e-9);
}

TEST(EdgeCost, LiteralEuclideanTermIsFlooredAtZero) {
  const sse::EdgeCostParams p{0.99, 600, sse::EuclideanTerm::literal};
  // log_g(1 + 0.01 * d) < 0 for d > 0; with a zero-step Q term the mean is negative.
  EXPECT_DOUBLE_EQ(sse::edge_cost({0, 0}, {5, 0}, 0.0, p), 0.0);
  const double q = -(1.0 - std::pow(0.99, 20)) / 0.01;
  const double expect = 0.5 * (20.0 + std::log(1.0 + 0.01 * 5.0) / std::log(0.99));
  EXPECT_NEAR(sse::edge_cost({0, 0}, {5, 0}, q, p), expect, 1e-9);
}

TEST(EdgeCost, ValuesBelowTheGeometricBoundClampToHorizon) {
  const double floor_steps = steps_of(-(1.0 - std::pow(0.99, 600)) / 0.01, 0.99);
  EXPECT_NEAR(sse::value_to_steps(-150.0, 0.99, 600), floor_steps, 1e-9);
  EXPECT_TRUE(std::isfinite(sse::value_to_steps(-1e9, 0.99, 600)));
}

TEST(RefinedCost, Examples) {
  EXPECT_DOUBLE_EQ(sse::refined_cost(10.0, 0.6, 5.0), 30.0);
  EXPECT_DOUBLE_EQ(sse::refined_cost(10.0, 0.1, 5.0), 10.0);
  EXPECT_DOUBLE_EQ(sse::refined_cost(7.25, 0.0, 5.0), 7.25);
}

TEST(RefinedCost, NeverBelowRawAndEqualExactlyWhenMultiplierAtMostOne) {
  sse::Rng rng(11);
  std::uniform_real_distribution<double> d(0.0, 100.0), r(0.0, 1.0), c(1.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double raw = d(rng), ratio = r(rng), cd = c(rng);
    const double out = sse::refined_cost(raw, ratio, cd);
    EXPECT_GE(out, raw);
    if (cd * ratio <= 1.0) {
      EXPECT_EQ(out, raw);
    } else if (raw > 0.0) {
      EXPECT_GT(out, raw);
    }
  }
}

TEST(LandmarkGraph, LatticeIncludesBothBoundaryLines) {
  EXPECT_EQ(sse::LandmarkGraph::grid({0, 0, 24, 24}, 2.0, {}).size(), 169);
  EXPECT_EQ(sse::LandmarkGraph::grid({0, 0, 24, 24}, 24.0, {}).size(), 4);
}

TEST(LandmarkGraph, NodesInsideWallsArePruned) {
  const auto g = sse::LandmarkGraph::grid({0, 0, 8, 8}, 2.0, {{1, 1, 3, 3}});
  EXPECT_EQ(g.size(), 24);
  for (const GoalPoint& n : g.nodes()) EXPECT_FALSE(n == (GoalPoint{2, 2}));
}

TEST(LandmarkGraph, EdgesAvoidWallInteriors) {
  const std::vector<sse::Box> walls{{3, -1, 5, 5}};
  const auto g = sse::LandmarkGraph::grid({0, 0, 8, 8}, 2.0, walls);
  for (int i = 0; i < g.size(); ++i) {
    for (int j : g.neighbors(i)) {
      EXPECT_LE(sse::distance(g.node(i), g.node(j)), 3.0 + 1e-12);
      const GoalPoint a = g.node(i), b = g.node(j);
      // Sample the segment densely; no sample may be strictly inside the wall.
      for (int s = 0; s <= 100; ++s) {
        const double t = s / 100.0;
        EXPECT_FALSE(walls[0].strictly_contains({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}));
      }
    }
  }
}

TEST(PlanPath, ThreeNodeLine) {
  const GoalPoint a{0, 0}, b{2, 0}, c{4, 0};
  const sse::LandmarkGraph g({a, b, c}, {}, 2.5);
  auto half_distance = [](const GoalPoint& p, const GoalPoint& q) { return 0.5 * sse::distance(p, q); };
  const auto path = g.plan_path(a, c, half_distance, nullptr, 5.0);
  ASSERT_GE(path.waypoints.size(), 2u);
  EXPECT_EQ(path.waypoints.front(), b);
  EXPECT_EQ(path.waypoints.back(), c);
  EXPECT_DOUBLE_EQ(path.total_cost, 2.0);
  EXPECT_FALSE(path.fallback);
}

TEST(PlanPath, SubgoalNextToStartIsReachedDirectly) {
  const sse::LandmarkGraph g({{0, 0}, {2, 0}, {4, 0}}, {}, 2.5);
  auto dist = [](const GoalPoint& p, const GoalPoint& q) { return sse::distance(p, q); };
  const auto path = g.plan_path({0, 0}, {0.5, 0}, dist, nullptr, 5.0);
  ASSERT_EQ(path.waypoints.size(), 1u);
  EXPECT_EQ(path.waypoints[0], (GoalPoint{0.5, 0}));
  EXPECT_EQ(path.node_ids[0], -1);
}

TEST(PlanPath, RefinementReroutesAroundFailingCorridor) {
  const GoalPoint p0{0, 0}, s1{4, 0}, s2{8, 0}, l1{4, 8}, l2{8, 8}, e{12, 0};
  const sse::LandmarkGraph g({p0, s1, s2, l1, l2, e}, {}, 9.0);
  CostTable costs;
  costs.set(p0, s1, 5);
  costs.set(s1, s2, 5);
  costs.set(s2, e, 0);
  costs.set(p0, l1, 7);
  costs.set(l1, l2, 7);
  costs.set(l2, e, 0);

  sse::GridPartition part({-2, -2, 14, 10}, 2.0);
  for (const GoalPoint& p : {s1, s2}) part.stats(part.cell_of(p)) = {10, 5};
  for (const GoalPoint& p : {p0, l1, l2, e}) ASSERT_DOUBLE_EQ(part.failure_ratio(part.cell_of(p)), 0.0);

  const auto refined = g.plan_path(p0, e, costs.fn(), &part, 5.0);
  EXPECT_DOUBLE_EQ(refined.total_cost, 14.0);
  EXPECT_EQ(refined.waypoints.at(0), l1);

  const auto plain = g.plan_path(p0, e, costs.fn(), &part, 1.0);
  EXPECT_DOUBLE_EQ(plain.total_cost, 10.0);
  EXPECT_EQ(plain.waypoints.at(0), s1);

  // The augmented graph carries the short corridor at 2.5x its raw cost.
  const auto aug = g.augmented(p0, e, costs.fn(), &part, 5.0);
  EXPECT_DOUBLE_EQ(oracle::cheapest_simple_path(aug.out, g.size(), g.size() + 1), 14.0);
  double short_cost = 0.0;
  for (const auto& [v, w] : aug.out[0]) {
    if (v == 1) short_cost += w;
  }
  for (const auto& [v, w] : aug.out[1]) {
    if (v == 2) short_cost += w;
  }
  EXPECT_DOUBLE_EQ(short_cost, 25.0);
}

TEST(PlanPath, UnreachableSubgoalFallsBackToNearestNode) {
  // The subgoal is boxed in by a wall ring, so only the direct append remains.
  const std::vector<sse::Box> walls{{5, 5, 11, 6}, {5, 10, 11, 11}, {5, 5, 6, 11}, {10, 5, 11, 11}};
  const sse::LandmarkGraph g({{0, 0}, {2, 2}, {4, 4}}, walls, 3.0);
  auto dist = [](const GoalPoint& p, const GoalPoint& q) { return sse::distance(p, q); };
  const auto path = g.plan_path({0, 0}, {8, 8}, dist, nullptr, 5.0);
  EXPECT_TRUE(path.fallback);
  EXPECT_EQ(path.waypoints.back(), (GoalPoint{8, 8}));
  EXPECT_EQ(path.waypoints[path.waypoints.size() - 2], (GoalPoint{4, 4}));
}

TEST(PlanPath, IsolatedStartThrows) {
  const sse::LandmarkGraph g({{0, 0}, {2, 0}}, {}, 2.5);
  auto dist = [](const GoalPoint& p, const GoalPoint& q) { return sse::distance(p, q); };
  EXPECT_THROW(g.plan_path({50, 50}, {0, 0}, dist, nullptr, 5.0), sse::PlannerError);
}

TEST(Dijkstra, MatchesExhaustiveEnumerationOnRandomDigraphs) {
  sse::Rng rng(21);
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int inst = 0; inst < 300; ++inst) {
    const int n = size(rng);
    sse::WeightedDigraph g(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && u(rng) < 0.4) g.add_edge(i, j, 10.0 * (1.0 - u(rng)));
      }
    }
    const auto sp = sse::dijkstra(g, 0);
    for (int t = 1; t < n; ++t) {
      const double want = oracle::cheapest_simple_path(g.out, 0, t);
      EXPECT_EQ(sp.dist[static_cast<std::size_t>(t)], want);
      const auto path = sp.path_to(t);
      if (std::isfinite(want)) {
        ASSERT_FALSE(path.empty());
        EXPECT_EQ(path.front(), 0);
        EXPECT_EQ(path.back(), t);
      } else {
        EXPECT_TRUE(path.empty());
      }
    }
  }
}

}  // namespace

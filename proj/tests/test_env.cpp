#include <gtest/gtest.h>

#include "sse/env.hpp"

namespace {

using sse::EnvConfig;
using sse::EnvState;
using sse::GoalPoint;

EnvConfig open_field() {
  EnvConfig c;
  c.name = "open";
  c.bounds = {0, 0, 10, 10};
  c.start = {3, 3};
  c.task = {sse::TaskKind::single_goal, {{9, 9}}};
  c.horizon = 50;
  return c;
}

EnvState at(GoalPoint p, std::uint32_t flags = 0) {
  EnvState s;
  s.position = p;
  s.flags = flags;
  return s;
}

TEST(EnvStep, FreeMove) {
  const EnvConfig c = open_field();
  sse::Rng rng(1);
  const auto r = sse::step(sse::reset(c), {1, 0}, c, rng);
  EXPECT_EQ(r.next_state.position, (GoalPoint{4, 3}));
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.next_state.t, 1);
  EXPECT_FALSE(r.done);
}

TEST(EnvStep, WallClipsTheBlockedAxisOnly) {
  EnvConfig c = open_field();
  c.walls = {{4, 0, 5, 10}};
  sse::Rng rng(1);
  const auto r = sse::step(at({3.5, 3}), {1, 0}, c, rng);
  EXPECT_LT(r.next_state.position.x, 4.0);
  EXPECT_NEAR(r.next_state.position.x, 4.0, 1e-5);
  EXPECT_EQ(r.next_state.position.y, 3.0);

  // Diagonal into the wall keeps the free component.
  const auto d = sse::step(at({3.5, 3}), {1, 1}, c, rng);
  EXPECT_LT(d.next_state.position.x, 4.0);
  EXPECT_EQ(d.next_state.position.y, 4.0);
}

TEST(EnvStep, BoundsClamp) {
  const EnvConfig c = open_field();
  sse::Rng rng(1);
  const auto r = sse::step(at({0.2, 9.7}), {-1, 1}, c, rng);
  EXPECT_EQ(r.next_state.position, (GoalPoint{0, 10}));
}

TEST(EnvStep, CertainSlipFreezesTheAgent) {
  EnvConfig c = open_field();
  c.slip_zones = {{{2, 2, 4, 4}, 1.0}};
  sse::Rng rng(1);
  EnvState s = sse::reset(c);
  for (const sse::Action a : {sse::Action{1, 0}, {0, 1}, {-1, -1}, {0.3, -0.7}}) {
    const auto r = sse::step(s, a, c, rng);
    EXPECT_EQ(r.next_state.position, c.start);
    EXPECT_TRUE(r.next_state.stuck_in_slip);
    s = r.next_state;
  }
}

TEST(EnvStep, SlipStickRateMatchesProbability) {
  EnvConfig c = open_field();
  c.slip_zones = {{{2, 2, 4, 4}, 0.3}};
  sse::Rng rng(7);
  int stuck = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) stuck += sse::step(sse::reset(c), {1, 0}, c, rng).next_state.stuck_in_slip ? 1 : 0;
  const double p = static_cast<double>(stuck) / n;
  EXPECT_NEAR(p, 0.3, 4.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST(EnvStep, RejectsBadActionsAndFinishedEpisodes) {
  const EnvConfig c = open_field();
  sse::Rng rng(1);
  EXPECT_THROW(sse::step(sse::reset(c), {std::nan(""), 0}, c, rng), std::invalid_argument);
  EXPECT_THROW(sse::step(sse::reset(c), {1.5, 0}, c, rng), std::invalid_argument);
  EnvState s = sse::reset(c);
  s.t = c.horizon;
  EXPECT_THROW(sse::step(s, {0, 0}, c, rng), std::logic_error);
}

TEST(EnvStep, HorizonEndsTheEpisode) {
  EnvConfig c = open_field();
  c.horizon = 3;
  sse::Rng rng(1);
  EnvState s = sse::reset(c);
  for (int i = 0; i < 3; ++i) {
    const auto r = sse::step(s, {0, 0}, c, rng);
    EXPECT_EQ(r.done, i == 2);
    s = r.next_state;
  }
}

TEST(EnvReward, SingleGoalPaysOnce) {
  const EnvConfig c = open_field();
  sse::Rng rng(1);
  const auto enter = sse::step(at({6.5, 9}), {1, 0}, c, rng);
  EXPECT_EQ(enter.reward, 1.0);
  EXPECT_TRUE(enter.task_complete);
  EXPECT_TRUE(enter.done);
  EXPECT_TRUE(enter.info.reached_goal);
  EnvState inside = enter.next_state;
  const auto stay = sse::step(inside, {0, 0}, c, rng);
  EXPECT_EQ(stay.reward, 0.0);
}

TEST(EnvReward, DoubleKeyChestNeedsKeysInOrder) {
  const EnvConfig c = sse::builtin_env("double_key_chest");
  const auto& p = c.task.points;
  const EnvState none = at(p[1]);
  EXPECT_EQ(sse::advance_flags(0, p[1], c), 0u);
  EXPECT_EQ(sse::reward_of(none, at(p[1], sse::advance_flags(0, p[1], c)), c), 0.0);
  EXPECT_EQ(sse::advance_flags(0, p[0], c), 1u);
  EXPECT_EQ(sse::advance_flags(1, p[1], c), 3u);
  EXPECT_EQ(sse::advance_flags(1, p[2], c), 1u);
  EXPECT_EQ(sse::advance_flags(3, p[2], c), 7u);
  EXPECT_EQ(sse::reward_of(at(p[0]), at(p[0], 1u), c), 1.0);
  EXPECT_EQ(sse::reward_of(at(p[1], 1u), at(p[1], 3u), c), 1.0);
  EXPECT_EQ(sse::reward_of(at(p[2], 3u), at(p[2], 7u), c), 5.0);
}

TEST(EnvReward, KeyChestGoalWithoutKeyPaysNothing) {
  const EnvConfig c = sse::builtin_env("key_chest");
  const GoalPoint chest = c.task.points[1];
  EXPECT_EQ(sse::advance_flags(0, chest, c), 0u);
  EXPECT_EQ(sse::reward_of(at(chest), at(chest, sse::advance_flags(0, chest, c)), c), 0.0);
  EXPECT_EQ(sse::reward_of(at(chest, 1u), at(chest, 3u), c), 5.0);
}

TEST(EnvProjection, PhiIsThePosition) {
  EXPECT_EQ(sse::phi(at({3, 7})), (GoalPoint{3, 7}));
  EXPECT_EQ(sse::phi(at({3, 7}, 5u)), (GoalPoint{3, 7}));
  const EnvConfig c = sse::builtin_env("u_maze");
  EXPECT_EQ(sse::phi(sse::reset(c)), c.start);
}

TEST(Builtins, AllValidateAndRoundTripThroughText) {
  for (const std::string& name : sse::builtin_env_names()) {
    const EnvConfig c = sse::builtin_env(name);
    const EnvConfig back = sse::parse_env_text(sse::env_to_text(c));
    EXPECT_EQ(back.bounds, c.bounds) << name;
    EXPECT_EQ(back.walls, c.walls) << name;
    EXPECT_EQ(back.slip_zones, c.slip_zones) << name;
    EXPECT_EQ(back.start, c.start) << name;
    EXPECT_EQ(back.task.points, c.task.points) << name;
    EXPECT_EQ(back.horizon, c.horizon) << name;
  }
  EXPECT_THROW(sse::builtin_env("nowhere"), sse::ConfigError);
}

TEST(Builtins, ScenarioShapes) {
  const EnvConfig u = sse::builtin_env("u_maze");
  EXPECT_EQ(u.bounds, (sse::Box{0, 0, 20, 20}));
  EXPECT_EQ(u.horizon, 600);
  EXPECT_LT(u.task.points[0].x, 10.0);
  EXPECT_GT(u.task.points[0].y, 10.0);

  const EnvConfig b = sse::builtin_env("bottleneck");
  for (const sse::SlipZone& z : b.slip_zones) EXPECT_EQ(z.stick_probability, 0.3);
  EXPECT_FALSE(b.slip_zones.empty());

  const EnvConfig k = sse::builtin_env("double_key_chest");
  EXPECT_EQ(k.horizon, 3000);
  EXPECT_EQ(k.task.points[0], (GoalPoint{16, 32}));
}

TEST(EnvText, ErrorsNameTheLine) {
  const std::string text = "bounds = 0 0 10 10\nstart = 1 1\nwall = 1 2 3\ntask = single_goal 5 5\n";
  try {
    sse::parse_env_text(text, "maze.env");
    FAIL() << "expected a ConfigError";
  } catch (const sse::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("maze.env:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sse::parse_env_text("bounds = 0 0 10 10\nstart = 1 1\n"), sse::ConfigError);
  EXPECT_THROW(sse::parse_env_text("bounds = 0 0 10 10\nstart = 1 1\ntask = single_goal 50 5\n"),
               sse::ConfigError);
}

TEST(EnvStep, WallsAreImpermeableUnderRandomActions) {
  sse::Rng rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const std::string& name : sse::builtin_env_names()) {
    const EnvConfig c = sse::builtin_env(name);
    EnvState s = sse::reset(c);
    for (int i = 0; i < 20000; ++i) {
      const auto r = sse::step(s, {u(rng), u(rng)}, c, rng);
      ASSERT_TRUE(c.free(r.next_state.position)) << name << " step " << i;
      ASSERT_GE(r.reward, 0.0);
      ASSERT_LE(r.reward, 5.0);
      s = r.done ? sse::reset(c) : r.next_state;
    }
  }
}

}  // namespace

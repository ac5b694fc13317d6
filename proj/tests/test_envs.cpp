#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mep/envs.hpp"

using namespace mep;

namespace {

Vector steer(const State& s, const GoalVec& g, double speed) {
  Vector a(2);
  for (int i = 0; i < 2; ++i) a[i] = std::clamp((g[i] - s.achieved_goal[i]) / speed, -1.0, 1.0);
  return a;
}

}  // namespace

TEST(Reset, StartsAtCenterWithZeroContext) {
  for (const char* name : {"point_reach", "drift_reach"}) {
    auto env = make_env(name);
    for (std::uint64_t seed : {0ull, 1ull, 12345ull}) {
      const auto r = env->reset(seed);
      EXPECT_EQ(r.state.achieved_goal, (GoalVec{0.5, 0.5}));
      EXPECT_EQ(r.state.context, (Vector{0.0, 0.0}));
      EXPECT_EQ(r.state.full(), (Vector{0.5, 0.5, 0.0, 0.0}));
      EXPECT_EQ(env->elapsed(), 0u);
    }
  }
}

TEST(Reset, SameSeedSameGoal) {
  auto a = make_env("point_reach");
  auto b = make_env("point_reach");
  const auto ra = a->reset(99);
  const auto rb = b->reset(99);
  EXPECT_EQ(ra.state, rb.state);
  EXPECT_EQ(ra.goal, rb.goal);
  EXPECT_NE(a->reset(100).goal, ra.goal);
}

TEST(Reset, GoalsUniformOnFiveByFiveGrid) {
  auto env = make_env("point_reach");
  const int n = 10000;
  std::vector<int> counts(25, 0);
  for (int s = 0; s < n; ++s) {
    const auto g = env->reset(static_cast<std::uint64_t>(s)).goal;
    ASSERT_GE(g[0], 0.0);
    ASSERT_LE(g[0], 1.0);
    const int cx = std::min(4, static_cast<int>(g[0] * 5));
    const int cy = std::min(4, static_cast<int>(g[1] * 5));
    ++counts[cy * 5 + cx];
  }
  double chi2 = 0.0;
  const double expected = n / 25.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 42.98);  // 0.99 quantile, 24 degrees of freedom
}

TEST(Step, ReachingGoalExactlyGivesZeroReward) {
  auto env = make_env("point_reach");
  auto [state, goal] = env->reset(4);
  StepResult last;
  for (std::size_t t = 0; t < env->spec().horizon; ++t) {
    last = env->step(steer(state, goal, 0.05));
    state = last.state;
  }
  EXPECT_NEAR(state.achieved_goal[0], goal[0], 1e-12);
  EXPECT_NEAR(state.achieved_goal[1], goal[1], 1e-12);
  EXPECT_EQ(last.reward, 0.0);
  EXPECT_TRUE(last.is_success);
  EXPECT_TRUE(last.done);
}

TEST(Step, FarFromGoalGivesMinusOne) {
  const EnvSpec spec;
  EXPECT_EQ(compute_reward(Vector{0.5, 0.5}, Vector{0.5 + 2 * spec.tolerance, 0.5}, spec), -1.0);
  auto env = make_env("point_reach");
  const auto r = env->reset(0);
  const double dist = std::hypot(r.goal[0] - 0.5, r.goal[1] - 0.5);
  ASSERT_GT(dist, 2 * spec.tolerance);
  const auto s = env->step(Vector{0.0, 0.0});
  EXPECT_EQ(s.reward, -1.0);
  EXPECT_FALSE(s.is_success);
}

TEST(Step, WallClampsPositionAndActions) {
  auto env = make_env("point_reach");
  env->reset(1);
  StepResult s;
  for (int t = 0; t < 20; ++t) s = env->step(Vector{5.0, -7.0});
  EXPECT_EQ(s.state.achieved_goal, (GoalVec{1.0, 0.0}));
  EXPECT_EQ(s.state.context, (Vector{1.0, -1.0}));
}

TEST(Step, DriftPushesLeft) {
  auto env = make_env("drift_reach");
  env->reset(1);
  const auto s = env->step(Vector{0.0, 0.0});
  EXPECT_NEAR(s.state.achieved_goal[0], 0.48, 1e-15);
  EXPECT_EQ(s.state.achieved_goal[1], 0.5);
}

TEST(Step, FixedHorizonAndErrors) {
  auto env = make_env("point_reach");
  EXPECT_THROW(env->step(Vector{0.0, 0.0}), Error);
  env->reset(3);
  for (std::size_t t = 0; t + 1 < env->spec().horizon; ++t) EXPECT_FALSE(env->step(Vector{0.0, 0.0}).done);
  EXPECT_TRUE(env->step(Vector{0.0, 0.0}).done);
  EXPECT_THROW(env->step(Vector{0.0, 0.0}), Error);
  env->reset(3);
  EXPECT_THROW(env->step(Vector{0.0}), ShapeError);
}

TEST(Step, RewardMatchesComputeReward) {
  auto env = make_env("drift_reach");
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int ep = 0; ep < 20; ++ep) {
    auto [state, goal] = env->reset(static_cast<std::uint64_t>(ep));
    StepResult s;
    do {
      s = env->step(ep % 2 ? steer(state, goal, 0.05) : Vector{u(rng), u(rng)});
      state = s.state;
      EXPECT_EQ(s.reward, compute_reward(s.state.achieved_goal, goal, env->spec()));
      EXPECT_EQ(s.is_success, s.reward == 0.0);
      for (double x : s.state.achieved_goal) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
    } while (!s.done);
  }
}

TEST(ComputeReward, BoundaryInclusive) {
  const EnvSpec spec;
  EXPECT_EQ(compute_reward(Vector{0.3, 0.7}, Vector{0.3, 0.7}, spec), 0.0);
  EXPECT_EQ(compute_reward(Vector{0.0, 0.0}, Vector{0.05, 0.0}, spec), 0.0);
  EXPECT_EQ(compute_reward(Vector{0.0, 0.0}, Vector{0.05 + 1e-9, 0.0}, spec), -1.0);
  EXPECT_THROW(compute_reward(Vector{0.0}, Vector{0.0, 0.0}, spec), ShapeError);
}

TEST(EnvSpec, ValidateRejectsDegenerateValues) {
  EnvSpec s;
  s.tolerance = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = EnvSpec{};
  s.horizon = 1;
  EXPECT_THROW(s.validate(), Error);
}

TEST(MakeEnv, KnownNamesOnly) {
  EXPECT_TRUE(is_known_env("point_reach"));
  EXPECT_TRUE(is_known_env("drift_reach"));
  EXPECT_FALSE(is_known_env("fetch_push"));
  EXPECT_THROW(make_env("fetch_push"), Error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "mep/replay.hpp"

using namespace mep;

namespace {

// Straight-line trajectory from `start` moving by `step` each timestep.
Trajectory line_trajectory(std::size_t T, GoalVec start, GoalVec step, GoalVec goal = {0.9, 0.9}) {
  const EnvSpec spec;
  Trajectory tr;
  tr.env_goal = goal;
  GoalVec pos = start;
  for (std::size_t t = 0; t <= T; ++t) {
    tr.states.push_back(State{pos, {step[0], step[1]}});
    tr.achieved_goals.push_back(pos);
    if (t == T) break;
    tr.actions.push_back({step[0] / 0.05, step[1] / 0.05});
    pos = {pos[0] + step[0], pos[1] + step[1]};
    tr.rewards.push_back(compute_reward(pos, goal, spec));
  }
  return tr;
}

EpisodicBuffer buffer_of(std::size_t n, std::size_t T = 5, std::size_t capacity = 0) {
  EpisodicBuffer b(capacity ? capacity : n);
  for (std::size_t i = 0; i < n; ++i)
    b.store_episode(line_trajectory(T, {0.1 * static_cast<double>(i % 10), 0.2}, {0.01, 0.02}));
  return b;
}

double chi_square(const std::vector<double>& counts, const std::vector<double>& probs, double n) {
  double c = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * n;
    c += (counts[i] - e) * (counts[i] - e) / e;
  }
  return c;
}

}  // namespace

TEST(Buffer, StoreIntoEmpty) {
  EpisodicBuffer b(4);
  EXPECT_TRUE(b.empty());
  EXPECT_EQ(b.store_episode(line_trajectory(5, {0.5, 0.5}, {0.0, 0.0})), 0u);
  EXPECT_EQ(b.size(), 1u);
  EXPECT_EQ(b.horizon(), 5u);
  EXPECT_EQ(b.at(0).id, 0u);
}

TEST(Buffer, EvictsOldestFirst) {
  const std::size_t cap = 3;
  EpisodicBuffer b(cap);
  for (std::size_t i = 0; i <= cap; ++i) b.store_episode(line_trajectory(4, {0.5, 0.5}, {0.0, 0.0}));
  EXPECT_EQ(b.size(), cap);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NE(b.at(i).id, 0u);
  EXPECT_EQ(b.at(0).id, 1u);
  EXPECT_EQ(b.at(2).id, 3u);
  EXPECT_EQ(b.next_id(), 4u);
}

TEST(Buffer, StoredGoalsMirrorStates) {
  auto b = buffer_of(3);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& tr = b.at(i);
    for (std::size_t t = 0; t < tr.states.size(); ++t) EXPECT_EQ(tr.achieved_goals[t], tr.states[t].achieved_goal);
  }
}

TEST(Buffer, RejectsMalformedTrajectories) {
  EpisodicBuffer b(4);
  auto tr = line_trajectory(5, {0.5, 0.5}, {0.0, 0.0});
  tr.achieved_goals[2] = {0.0, 0.0};
  EXPECT_THROW(b.store_episode(tr), Error);
  tr = line_trajectory(5, {0.5, 0.5}, {0.0, 0.0});
  tr.rewards.pop_back();
  EXPECT_THROW(b.store_episode(tr), Error);
  b.store_episode(line_trajectory(5, {0.5, 0.5}, {0.0, 0.0}));
  EXPECT_THROW(b.store_episode(line_trajectory(6, {0.5, 0.5}, {0.0, 0.0})), Error);
}

TEST(Relabel, ZeroProbabilityKeepsEnvGoal) {
  const auto tr = line_trajectory(10, {0.1, 0.1}, {0.05, 0.05}, {0.6, 0.6});
  Rng rng(1);
  const EnvSpec spec;
  for (std::size_t t = 0; t < 10; ++t) {
    const auto s = her_relabel(tr, t, rng, 0.0, spec);
    EXPECT_EQ(s.goal, tr.env_goal);
    EXPECT_EQ(s.reward, tr.rewards[t]);
    EXPECT_EQ(s.state, tr.states[t]);
    EXPECT_EQ(s.next_state, tr.states[t + 1]);
  }
}

TEST(Relabel, FutureGoalIsLaterAchievedGoalAndRewardConsistent) {
  const auto tr = line_trajectory(20, {0.0, 0.0}, {0.03, 0.04});
  Rng rng(2);
  const EnvSpec spec;
  for (int k = 0; k < 2000; ++k) {
    const std::size_t t = static_cast<std::size_t>(k % 20);
    const auto s = her_relabel(tr, t, rng, 1.0, spec);
    bool later = false;
    for (std::size_t u = t + 1; u <= 20; ++u) later |= s.goal == tr.achieved_goals[u];
    EXPECT_TRUE(later);
    EXPECT_EQ(s.reward, compute_reward(s.next_state.achieved_goal, s.goal, spec));
  }
  // t' = t + 1 always yields reward 0.
  const auto last = her_relabel(tr, 19, rng, 1.0, spec);
  EXPECT_EQ(last.goal, tr.achieved_goals[20]);
  EXPECT_EQ(last.reward, 0.0);
}

TEST(Relabel, FutureIndexUniform) {
  const std::size_t T = 50;
  // Steps of 0.01 in x make every achieved goal distinct.
  const auto tr = line_trajectory(T, {0.0, 0.0}, {0.01, 0.0});
  Rng rng(3);
  const EnvSpec spec;
  std::vector<double> counts(T, 0.0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto s = her_relabel(tr, 0, rng, 1.0, spec);
    const auto idx = static_cast<std::size_t>(std::lround(s.goal[0] / 0.01));
    ASSERT_GE(idx, 1u);
    ASSERT_LE(idx, T);
    counts[idx - 1] += 1.0;
  }
  EXPECT_LT(chi_square(counts, std::vector<double>(T, 1.0 / T), n), 74.92);  // 0.99 quantile, df 49
}

TEST(Priorities, HandComputedRanks) {
  auto b = buffer_of(3);
  const auto t = compute_priorities(b, Vector{0.01, 0.003, 0.02});
  EXPECT_EQ(t.rank, (std::vector<std::size_t>{2, 3, 1}));
  EXPECT_NEAR(t.sample_prob[0], 2.0 / 6, 1e-15);
  EXPECT_NEAR(t.sample_prob[1], 3.0 / 6, 1e-15);
  EXPECT_NEAR(t.sample_prob[2], 1.0 / 6, 1e-15);
  EXPECT_NEAR(t.normalized_prob[0], 0.01 / 0.033, 1e-15);
  EXPECT_FALSE(t.uniform_fallback);
  double z = 0.0;
  for (double p : t.normalized_prob) z += p * (1 - p);
  EXPECT_NEAR(t.normalization, z, 1e-15);
}

TEST(Priorities, TiesBrokenByOlderId) {
  auto b = buffer_of(2);
  const auto t = compute_priorities(b, Vector{0.5, 0.5});
  EXPECT_EQ(t.rank, (std::vector<std::size_t>{1, 2}));
  EXPECT_NEAR(t.sample_prob[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(t.sample_prob[1], 2.0 / 3, 1e-15);
  auto b5 = buffer_of(5);
  const auto t5 = compute_priorities(b5, Vector(5, 2.0));
  EXPECT_EQ(t5.rank, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(Priorities, SingleTrajectory) {
  auto b = buffer_of(1);
  const auto t = compute_priorities(b, Vector{0.7});
  EXPECT_EQ(t.sample_prob, (Vector{1.0}));
  EXPECT_EQ(t.rank, (std::vector<std::size_t>{1}));
}

TEST(Priorities, AllZeroFallsBackToUniform) {
  auto b = buffer_of(4);
  const auto t = compute_priorities(b, Vector(4, 0.0));
  EXPECT_TRUE(t.uniform_fallback);
  for (double p : t.sample_prob) EXPECT_EQ(p, 0.25);
}

TEST(Priorities, RejectsBadDensities) {
  auto b = buffer_of(2);
  EXPECT_THROW(compute_priorities(b, Vector{0.1}), ShapeError);
  EXPECT_THROW(compute_priorities(b, Vector{-0.1, 0.2}), Error);
  EXPECT_THROW(compute_priorities(b, Vector{std::nan(""), 0.2}), Error);
}

TEST(Priorities, InvariantsOnRandomDensities) {
  Rng rng(8);
  for (std::size_t n : {2u, 7u, 40u}) {
    auto b = buffer_of(n);
    Vector d(n);
    for (auto& x : d) x = uniform01(rng);
    const auto t = compute_priorities(b, d);
    double s1 = 0, s2 = 0, s3 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s1 += t.normalized_prob[i];
      s2 += t.proposal_prob[i];
      s3 += t.sample_prob[i];
      EXPECT_DOUBLE_EQ(t.sample_prob[i], static_cast<double>(t.rank[i]) / (n * (n + 1) / 2.0));
      for (std::size_t j = 0; j < n; ++j)
        if (d[i] < d[j]) {
          EXPECT_GT(t.rank[i], t.rank[j]);
          EXPECT_GT(t.sample_prob[i], t.sample_prob[j]);
        }
    }
    EXPECT_NEAR(s1, 1.0, 1e-9);
    EXPECT_NEAR(s2, 1.0, 1e-9);
    EXPECT_NEAR(s3, 1.0, 1e-9);
    auto ranks = t.rank;
    std::sort(ranks.begin(), ranks.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(ranks[i], i + 1);
  }
}

TEST(Priorities, LogDomainAgreesWithLinear) {
  auto b = buffer_of(5);
  const Vector d{0.2, 0.05, 0.4, 0.15, 0.2};
  Vector logd(5);
  for (std::size_t i = 0; i < 5; ++i) logd[i] = std::log(d[i]);
  const auto lin = compute_priorities(b, d);
  const auto lg = compute_priorities_from_log(b, logd);
  EXPECT_EQ(lin.rank, lg.rank);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(lin.normalized_prob[i], lg.normalized_prob[i], 1e-12);
  // Densities far below double range still rank correctly.
  const auto tiny = compute_priorities_from_log(b, Vector{-2000, -2100, -1900, -2050, -2000});
  EXPECT_EQ(tiny.rank, (std::vector<std::size_t>{2, 5, 1, 4, 3}));
}

TEST(SampleBatch, MepFrequenciesFollowSampleProb) {
  auto b = buffer_of(3);
  // densities chosen so sample_prob = (1/6, 3/6, 2/6)
  const auto t = compute_priorities(b, Vector{0.5, 0.1, 0.3});
  ASSERT_NEAR(t.sample_prob[1], 0.5, 1e-15);
  Rng rng(77);
  SampleConfig sc;
  sc.strategy = SamplingStrategy::mep;
  const EnvSpec spec;
  std::vector<double> counts(3, 0.0);
  const int n = 600000;
  const auto batch = sample_batch(b, sc, n, rng, spec, &t);
  for (const auto& s : batch) counts[s.trajectory] += 1.0;
  EXPECT_NEAR(counts[0] / n, 1.0 / 6, 0.01);
  EXPECT_NEAR(counts[1] / n, 1.0 / 2, 0.01);
  EXPECT_NEAR(counts[2] / n, 1.0 / 3, 0.01);
}

TEST(SampleBatch, UniformSingleTrajectory) {
  auto b = buffer_of(1);
  Rng rng(1);
  const EnvSpec spec;
  for (const auto& s : sample_batch(b, SampleConfig{}, 50, rng, spec)) {
    EXPECT_EQ(s.trajectory, 0u);
    EXPECT_EQ(s.td_weight, 1.0);
    EXPECT_LT(s.timestep, b.horizon());
  }
}

TEST(SampleBatch, StaleTableAndEmptyBufferRejected) {
  auto b = buffer_of(3, 5, 10);
  const auto t = compute_priorities(b, Vector{0.1, 0.2, 0.3});
  b.store_episode(line_trajectory(5, {0.3, 0.3}, {0.0, 0.0}));
  Rng rng(1);
  SampleConfig sc;
  sc.strategy = SamplingStrategy::mep;
  const EnvSpec spec;
  EXPECT_THROW(sample_batch(b, sc, 4, rng, spec, &t), Error);
  EXPECT_THROW(sample_batch(b, sc, 4, rng, spec, nullptr), Error);
  EpisodicBuffer empty(2);
  EXPECT_THROW(sample_batch(empty, SampleConfig{}, 4, rng, spec), Error);
}

TEST(SampleBatch, EveryRewardRecomputed) {
  auto b = buffer_of(6, 10);
  Rng rng(4);
  SampleConfig sc;
  sc.her = true;
  const EnvSpec spec;
  for (const auto& s : sample_batch(b, sc, 500, rng, spec))
    EXPECT_EQ(s.reward, compute_reward(s.next_state.achieved_goal, s.goal, spec));
}

TEST(Per, ProportionalFrequencies) {
  PerSampler per(2, 1, 1.0, 1e-6);
  per.on_store(0);
  per.on_store(1);
  const std::vector<std::size_t> ids{0, 1};
  per.update_priorities(ids, Vector{1.0, 3.0});
  Rng rng(5);
  const int n = 100000;
  double hits = 0.0;
  for (const auto& p : per.sample(n, rng, 0.4, 2)) hits += p.transition == 1 ? 1.0 : 0.0;
  EXPECT_NEAR(hits / n, 0.75, 0.01);
}

TEST(Per, ImportanceWeightsNormalizedByMax) {
  PerSampler per(2, 1, 1.0, 1e-6);
  per.on_store(0);
  per.on_store(1);
  const std::vector<std::size_t> ids{0, 1};
  per.update_priorities(ids, Vector{1.0, 3.0});
  Rng rng(6);
  const auto picks = per.sample(200, rng, 1.0, 2);
  double max_w = 0.0;
  for (const auto& p : picks) max_w = std::max(max_w, p.weight);
  EXPECT_DOUBLE_EQ(max_w, 1.0);
  for (const auto& p : picks) {
    // (N P)^-1 with P = (0.25, 0.75), normalized by the rarer pick's weight 2.
    const double expected = p.transition == 0 ? 1.0 : (1.0 / 1.5) / 2.0;
    EXPECT_NEAR(p.weight, expected, 1e-5);
  }
}

TEST(Per, NewTransitionsGetMaxPriority) {
  PerSampler per(3, 2, 0.6, 1e-6);
  per.on_store(0);
  const std::vector<std::size_t> ids{0};
  per.update_priorities(ids, Vector{4.0});
  per.on_store(1);
  EXPECT_NEAR(per.tree().get(2), std::pow(4.0 + 1e-6, 0.6), 1e-12);
  EXPECT_NEAR(per.tree().get(3), std::pow(4.0 + 1e-6, 0.6), 1e-12);
  EXPECT_NEAR(per.tree().get(1), 1.0, 1e-12);
}

TEST(Per, BatchMapsSlotsToLogicalIndices) {
  const std::size_t T = 4;
  EpisodicBuffer b(3);
  PerSampler per(3, T);
  for (int i = 0; i < 5; ++i) {
    const auto slot = b.store_episode(line_trajectory(T, {0.1 * i, 0.5}, {0.0, 0.0}));
    per.on_store(slot);
  }
  Rng rng(9);
  SampleConfig sc;
  sc.strategy = SamplingStrategy::per;
  const EnvSpec spec;
  for (const auto& s : sample_batch(b, sc, 300, rng, spec, nullptr, &per)) {
    EXPECT_EQ(s.state, b.at(s.trajectory).states[s.timestep]);
    EXPECT_EQ(s.transition, b.slot_of(s.trajectory) * T + s.timestep);
    EXPECT_GT(s.td_weight, 0.0);
    EXPECT_LE(s.td_weight, 1.0);
  }
}

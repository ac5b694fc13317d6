#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mep/trainer.hpp"

using namespace mep;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config(Method method, const std::string& env = "drift_reach") {
  TrainConfig c;
  c.env = env;
  c.method = method;
  c.epochs = 3;
  c.episodes_per_epoch = 4;
  c.cycles_per_epoch = 2;
  c.optimization_steps = 6;
  c.batch_size = 16;
  c.buffer_capacity = 50;
  c.eval_episodes = 3;
  c.pearson_every = 1000;
  c.seed = 3;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("mep_trainer_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

bool same_record(const EpochRecord& a, const EpochRecord& b) {
  return a.epoch == b.epoch && a.env_steps == b.env_steps && a.success_rate == b.success_rate &&
         a.goal_entropy == b.goal_entropy && a.critic_loss == b.critic_loss &&
         a.actor_loss == b.actor_loss && a.pearson_r == b.pearson_r &&
         a.density_fallback == b.density_fallback;
}

}  // namespace

TEST(Methods, RoundTripNames) {
  for (const char* name : {"ddpg", "ddpg_her", "ddpg_mep", "ddpg_her_mep", "ddpg_per", "ddpg_her_per"})
    EXPECT_EQ(to_string(parse_method(name)), name);
  EXPECT_THROW(parse_method("sac"), Error);
  EXPECT_TRUE(uses_her(Method::ddpg_her_per));
  EXPECT_FALSE(uses_her(Method::ddpg_mep));
  EXPECT_EQ(sampling_strategy(Method::ddpg_her_mep), SamplingStrategy::mep);
  EXPECT_EQ(sampling_strategy(Method::ddpg_per), SamplingStrategy::per);
  EXPECT_EQ(sampling_strategy(Method::ddpg_her), SamplingStrategy::uniform);
}

TEST(RunEpoch, NoUpdatePathLeavesAgentUnchanged) {
  auto c = small_config(Method::ddpg);
  c.episodes_per_epoch = 1;
  c.optimization_steps = 0;
  Trainer t(c);
  const auto before = t.agent().params();
  const auto rec = t.run_epoch();
  EXPECT_EQ(t.buffer().size(), 1u);
  EXPECT_EQ(t.agent().params().actor, before.actor);
  EXPECT_EQ(t.agent().params().critic, before.critic);
  EXPECT_EQ(t.agent().params().actor_target, before.actor_target);
  EXPECT_EQ(rec.env_steps, 50u);
}

TEST(RunEpoch, EnvStepAccountingExact) {
  auto c = small_config(Method::ddpg_her);
  Trainer t(c);
  std::uint64_t prev = 0;
  for (std::size_t e = 0; e < 3; ++e) {
    const auto rec = t.run_epoch();
    EXPECT_EQ(rec.env_steps, (e + 1) * c.episodes_per_epoch * 50);
    EXPECT_GT(rec.env_steps, prev);
    prev = rec.env_steps;
    EXPECT_GE(rec.success_rate, 0.0);
    EXPECT_LE(rec.success_rate, 1.0);
    EXPECT_EQ(rec.epoch, e);
  }
}

TEST(RunEpoch, MepTableCoversBuffer) {
  Trainer t(small_config(Method::ddpg_her_mep));
  t.run_epoch();
  t.run_epoch();
  ASSERT_TRUE(t.priority_table().has_value());
  const auto& tab = *t.priority_table();
  EXPECT_EQ(tab.size(), t.buffer().size());
  EXPECT_TRUE(tab.matches(t.buffer()));
  double s = 0.0;
  for (double p : tab.sample_prob) s += p;
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(RunEpoch, EpochZeroUniformThenPreviousModel) {
  Trainer t(small_config(Method::ddpg_her_mep));
  t.run_epoch();
  ASSERT_TRUE(t.priority_table()->uniform_fallback);
  ASSERT_TRUE(t.density_model().has_value());
  const MoGParams model0 = *t.density_model();
  const Standardizer std0 = t.standardizer();
  t.run_epoch();
  // The table left by epoch 1 was built from the model fitted after epoch 0.
  const auto& tab = *t.priority_table();
  EXPECT_FALSE(tab.uniform_fallback);
  Vector logd(t.buffer().size());
  for (std::size_t i = 0; i < t.buffer().size(); ++i)
    logd[i] = mog_log_density(model0, featurize(t.buffer().at(i), std0).values);
  const auto expected = compute_priorities_from_log(t.buffer(), logd);
  EXPECT_EQ(tab.rank, expected.rank);
  EXPECT_EQ(tab.sample_prob, expected.sample_prob);
}

TEST(RunEpoch, BitIdenticalAcrossRuns) {
  for (Method m : {Method::ddpg_her_mep, Method::ddpg_her_per}) {
    auto c = small_config(m);
    c.pearson_every = 2;
    Trainer a(c), b(c);
    for (int e = 0; e < 2; ++e) EXPECT_TRUE(same_record(a.run_epoch(), b.run_epoch()));
    EXPECT_EQ(a.agent().params().actor, b.agent().params().actor);
  }
}

TEST(RunEpoch, PerMethodsRun) {
  Trainer t(small_config(Method::ddpg_per));
  const auto rec = t.run_epoch();
  EXPECT_TRUE(std::isfinite(rec.critic_loss));
  EXPECT_FALSE(t.priority_table().has_value());
}

TEST(RunEpoch, PearsonOnScheduleForMepOnly) {
  auto c = small_config(Method::ddpg_her_mep);
  c.pearson_every = 2;
  Trainer t(c);
  EXPECT_FALSE(t.run_epoch().pearson_r.has_value());
  const auto r = t.run_epoch();
  ASSERT_TRUE(r.pearson_r.has_value());
  EXPECT_GE(*r.pearson_r, -1.0);
  EXPECT_LE(*r.pearson_r, 1.0);
  auto h = small_config(Method::ddpg_her);
  h.pearson_every = 1;
  Trainer base(h);
  EXPECT_FALSE(base.run_epoch().pearson_r.has_value());
}

TEST(Evaluate, OracleControllerAlwaysSucceeds) {
  auto env = make_env("point_reach");
  const Policy oracle = [](const State& s, const GoalVec& g) {
    Vector a(2);
    for (int i = 0; i < 2; ++i) a[i] = std::clamp((g[i] - s.achieved_goal[i]) / 0.05, -1.0, 1.0);
    return a;
  };
  EXPECT_EQ(evaluate_policy(oracle, *env, 50, 0), 1.0);
}

TEST(Evaluate, ZeroPolicyRarelySucceeds) {
  auto env = make_env("point_reach");
  const Policy still = [](const State&, const GoalVec&) { return Vector{0.0, 0.0}; };
  EXPECT_LT(evaluate_policy(still, *env, 2000, 0), 0.05);
}

TEST(Evaluate, SingleEpisodeIsBinary) {
  Rng rng(1);
  Agent agent(EnvSpec{}, AgentConfig{}, rng);
  auto env = make_env("drift_reach");
  const double r = evaluate(agent, *env, 1, 5);
  EXPECT_TRUE(r == 0.0 || r == 1.0);
  EXPECT_THROW(evaluate(agent, *env, 0, 5), Error);
}

TEST(Pearson, PerfectLine) {
  const Vector x{0.1, 0.4, 0.2, 0.9};
  Vector y(4);
  for (int i = 0; i < 4; ++i) y[i] = 2 * x[i] + 1;
  EXPECT_NEAR(*pearson_correlation(x, y), 1.0, 1e-12);
}

TEST(Pearson, IndependentNearZero) {
  Rng rng(2);
  Vector x(10000), y(10000);
  for (auto& v : x) v = uniform01(rng);
  for (auto& v : y) v = uniform01(rng);
  EXPECT_LT(std::abs(*pearson_correlation(x, y)), 0.05);
}

TEST(Pearson, ConstantIsAbsent) {
  EXPECT_FALSE(pearson_correlation(Vector{1.0, 1.0, 1.0}, Vector{0.1, 0.2, 0.3}).has_value());
  EXPECT_THROW(pearson_correlation(Vector{1.0}, Vector{1.0, 2.0}), ShapeError);
}

TEST(Experiment, CsvHasHeaderAndOneRowPerEpoch) {
  auto c = small_config(Method::ddpg_her);
  c.epochs = 2;
  const auto dir = fresh_dir("two");
  const auto res = run_experiment(c, dir, "run");
  const auto lines = read_lines(res.csv_path);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "epoch,env_steps,success_rate,goal_entropy,critic_loss,actor_loss,pearson_r,wall_seconds");
  EXPECT_EQ(lines[1].substr(0, 6), "0,200,");
  EXPECT_TRUE(fs::exists(res.checkpoint_path));
  EXPECT_TRUE(fs::exists(res.plot_path));
  fs::remove_all(dir);
}

TEST(Experiment, StoppedEarlyKeepsCompleteRows) {
  auto c = small_config(Method::ddpg_her);
  c.epochs = 5;
  const auto dir = fresh_dir("stop");
  std::size_t seen = 0;
  const auto res = run_experiment(c, dir, "run", [&](const EpochRecord&) {
    // Rows already written must be complete when the run stops.
    EXPECT_EQ(read_lines(dir / "run.csv").size(), seen + 2);
    return ++seen < 2;
  });
  EXPECT_EQ(read_lines(res.csv_path).size(), 3u);
  fs::remove_all(dir);
}

TEST(Experiment, EmptyPearsonField) {
  EpochRecord r;
  r.epoch = 4;
  r.env_steps = 1000;
  r.success_rate = 0.5;
  const auto row = format_epoch_row(r);
  EXPECT_NE(row.find(",,"), std::string::npos);
  r.pearson_r = 0.25;
  EXPECT_NE(format_epoch_row(r).find(",0.25,"), std::string::npos);
}

TEST(Config, ValidateRejectsNonsense) {
  auto c = small_config(Method::ddpg);
  c.env = "mujoco";
  EXPECT_THROW(c.validate(), Error);
  c = small_config(Method::ddpg);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = small_config(Method::ddpg);
  c.relabel_prob = 1.5;
  EXPECT_THROW(Trainer{c}, Error);
}

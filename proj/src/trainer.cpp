#include "mep/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mep/plot.hpp"

namespace mep {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool uses_mep(Method m) { return m == Method::ddpg_mep || m == Method::ddpg_her_mep; }

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::ddpg: return "ddpg";
    case Method::ddpg_her: return "ddpg_her";
    case Method::ddpg_mep: return "ddpg_mep";
    case Method::ddpg_her_mep: return "ddpg_her_mep";
    case Method::ddpg_per: return "ddpg_per";
    case Method::ddpg_her_per: return "ddpg_her_per";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::ddpg, Method::ddpg_her, Method::ddpg_mep, Method::ddpg_her_mep,
                   Method::ddpg_per, Method::ddpg_her_per})
    if (to_string(m) == name) return m;
  throw Error("unknown method '" + name +
              "' (expected ddpg, ddpg_her, ddpg_mep, ddpg_her_mep, ddpg_per or ddpg_her_per)");
}

bool uses_her(Method method) {
  return method == Method::ddpg_her || method == Method::ddpg_her_mep ||
         method == Method::ddpg_her_per;
}

SamplingStrategy sampling_strategy(Method method) {
  if (uses_mep(method)) return SamplingStrategy::mep;
  if (method == Method::ddpg_per || method == Method::ddpg_her_per) return SamplingStrategy::per;
  return SamplingStrategy::uniform;
}

void TrainConfig::validate() const {
  require(is_known_env(env), "unknown environment '" + env + "'");
  require(epochs > 0, "epochs must be positive");
  require(episodes_per_epoch > 0, "episodes_per_epoch must be positive");
  require(cycles_per_epoch > 0, "cycles_per_epoch must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(buffer_capacity > 0, "buffer_capacity must be positive");
  require(eval_episodes > 0, "eval_episodes must be positive");
  require(mog_components > 0 && mog_iters > 0 && mog_tol > 0.0, "invalid density settings");
  require(relabel_prob >= 0.0 && relabel_prob <= 1.0, "relabel_prob must lie in [0, 1]");
  require(per_alpha >= 0.0 && per_beta_start >= 0.0 && per_beta_end >= 0.0, "invalid PER settings");
  require(pearson_every > 0 && entropy_grid >= 2, "invalid diagnostic settings");
}

double evaluate_policy(const Policy& policy, ReachEnv& env, std::size_t n_episodes,
                       std::uint64_t seed) {
  require(n_episodes >= 1, "evaluation needs at least one episode");
  std::size_t successes = 0;
  for (std::size_t i = 0; i < n_episodes; ++i) {
    auto [state, goal] = env.reset(seed + i);
    StepResult step;
    do {
      step = env.step(policy(state, goal));
      state = step.state;
    } while (!step.done);
    if (step.is_success) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

double evaluate(const Agent& agent, ReachEnv& env, std::size_t n_episodes, std::uint64_t seed) {
  Rng unused(0);
  return evaluate_policy(
      [&](const State& s, const GoalVec& g) { return agent.act(s, g, false, unused); }, env,
      n_episodes, seed);
}

std::optional<double> pearson_correlation(std::span<const double> x, std::span<const double> y) {
  require_shape(x.size() == y.size(), "pearson inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> pearson_diagnostic(const EpisodicBuffer& buffer, const PriorityTable& table,
                                         const Agent& agent) {
  require(!buffer.empty(), "pearson diagnostic needs a non-empty buffer");
  require(table.matches(buffer), "pearson diagnostic needs a current priority table");
  const std::size_t T = buffer.horizon();
  Vector x(buffer.size()), y(buffer.size());
  std::vector<RelabeledSample> transitions(T);
  Rng unused(0);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Trajectory& traj = buffer.at(i);
    for (std::size_t t = 0; t < T; ++t) {
      transitions[t] = her_relabel(traj, t, unused, 0.0, agent.spec());
    }
    const Vector td = agent.abs_td_errors(transitions);
    double mean = 0.0;
    for (double v : td) mean += v;
    x[i] = 1.0 - table.normalized_prob[i];
    y[i] = mean / static_cast<double>(T);
  }
  return pearson_correlation(x, y);
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)), buffer_(config_.buffer_capacity), rng_(splitmix64(config_.seed)) {
  config_.validate();
  env_ = make_env(config_.env);
  eval_env_ = make_env(config_.env);
  Rng init(splitmix64(config_.seed ^ 0xa6e27ULL));
  agent_ = std::make_unique<Agent>(env_->spec(), config_.agent, init);
  if (sampling_strategy(config_.method) == SamplingStrategy::per)
    per_.emplace(config_.buffer_capacity, env_->spec().horizon, config_.per_alpha);
}

Trajectory Trainer::rollout(bool explore, std::uint64_t reset_seed) {
  Trajectory traj;
  auto [state, goal] = env_->reset(reset_seed);
  traj.env_goal = goal;
  traj.states.push_back(state);
  traj.achieved_goals.push_back(state.achieved_goal);
  StepResult step;
  do {
    Vector a = agent_->act(state, goal, explore, rng_);
    step = env_->step(a);
    traj.actions.push_back(std::move(a));
    traj.rewards.push_back(step.reward);
    traj.states.push_back(step.state);
    traj.achieved_goals.push_back(step.state.achieved_goal);
    state = step.state;
  } while (!step.done);
  return traj;
}

void Trainer::store(Trajectory trajectory) {
  agent_->observe(trajectory);
  env_steps_ += trajectory.horizon();
  const std::size_t slot = buffer_.store_episode(std::move(trajectory));
  if (per_) per_->on_store(slot);
}

void Trainer::rebuild_priorities() {
  if (buffer_.empty()) return;
  if (!density_) {
    table_ = compute_priorities(buffer_, Vector(buffer_.size(), 0.0));
    return;
  }
  Vector log_density(buffer_.size());
  for (std::size_t i = 0; i < buffer_.size(); ++i)
    log_density[i] = mog_log_density(*density_, featurize(buffer_.at(i), standardizer_).values);
  table_ = compute_priorities_from_log(buffer_, log_density);
}

bool Trainer::refit_density() {
  try {
    standardizer_ = Standardizer::fit(buffer_);
    std::vector<Vector> features;
    features.reserve(buffer_.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i)
      features.push_back(featurize(buffer_.at(i), standardizer_).values);
    MogFitOptions opts;
    opts.components = config_.mog_components;
    opts.max_iters = config_.mog_iters;
    opts.tol = config_.mog_tol;
    opts.seed = rng_();
    density_ = fit_mog(features, opts).params;
    return true;
  } catch (const Error&) {
    density_.reset();
    return false;
  }
}

double Trainer::current_beta() const {
  const double frac = config_.epochs > 1 ? static_cast<double>(std::min(epoch_, config_.epochs - 1)) /
                                               static_cast<double>(config_.epochs - 1)
                                         : 1.0;
  return config_.per_beta_start + (config_.per_beta_end - config_.per_beta_start) * frac;
}

std::pair<double, double> Trainer::optimize(std::size_t steps) {
  SampleConfig sc;
  sc.strategy = sampling_strategy(config_.method);
  sc.her = uses_her(config_.method);
  sc.relabel_prob = config_.relabel_prob;
  sc.per_beta = current_beta();
  double critic = 0.0, actor = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto batch = sample_batch(buffer_, sc, config_.batch_size, rng_, env_->spec(),
                                    table_ ? &*table_ : nullptr, per_ ? &*per_ : nullptr);
    const auto result = agent_->update(batch);
    if (per_) {
      std::vector<std::size_t> ids(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) ids[i] = batch[i].transition;
      per_->update_priorities(ids, result.abs_td_errors);
    }
    critic += result.critic_loss;
    actor += result.actor_loss;
  }
  return {critic, actor};
}

EpochRecord Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  EpochRecord rec;
  rec.epoch = epoch_;
  const bool mep = uses_mep(config_.method);
  const std::size_t cycles = std::min(config_.cycles_per_epoch, config_.episodes_per_epoch);
  double critic_sum = 0.0, actor_sum = 0.0;
  std::size_t steps_done = 0;

  for (std::size_t c = 0; c < cycles; ++c) {
    const std::size_t episodes =
        config_.episodes_per_epoch / cycles + (c < config_.episodes_per_epoch % cycles ? 1 : 0);
    const std::size_t steps =
        config_.optimization_steps / cycles + (c < config_.optimization_steps % cycles ? 1 : 0);
    for (std::size_t e = 0; e < episodes; ++e) store(rollout(true, rng_()));
    // The density model stays frozen for the whole epoch; only new
    // trajectories enter the table.
    if (mep) rebuild_priorities();
    if (steps > 0) {
      const auto [critic, actor] = optimize(steps);
      critic_sum += critic;
      actor_sum += actor;
      steps_done += steps;
      agent_->soft_update_targets();
    }
  }
  if (mep) rec.density_fallback = !refit_density();

  rec.env_steps = env_steps_;
  rec.goal_entropy = buffer_goal_entropy(buffer_, config_.entropy_grid);
  if (steps_done > 0) {
    rec.critic_loss = critic_sum / static_cast<double>(steps_done);
    rec.actor_loss = actor_sum / static_cast<double>(steps_done);
  }
  rec.success_rate = evaluate(*agent_, *eval_env_, config_.eval_episodes,
                              splitmix64(config_.seed + 0x5eedULL) + epoch_ * config_.eval_episodes);
  if (mep && (epoch_ + 1) % config_.pearson_every == 0) {
    rebuild_priorities();
    if (table_ && !table_->uniform_fallback) rec.pearson_r = pearson_diagnostic(buffer_, *table_, *agent_);
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++epoch_;
  return rec;
}

std::string format_epoch_row(const EpochRecord& r) {
  char buf[512];
  std::string pearson;
  if (r.pearson_r) {
    char p[64];
    std::snprintf(p, sizeof p, "%.10g", *r.pearson_r);
    pearson = p;
  }
  std::snprintf(buf, sizeof buf, "%zu,%llu,%.10g,%.10g,%.10g,%.10g,%s,%.4f", r.epoch,
                static_cast<unsigned long long>(r.env_steps), r.success_rate, r.goal_entropy,
                r.critic_loss, r.actor_loss, pearson.c_str(), r.wall_seconds);
  return buf;
}

ExperimentResult run_experiment(const TrainConfig& config, const std::filesystem::path& out_dir,
                                const std::string& tag,
                                const std::function<bool(const EpochRecord&)>& on_epoch) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  ExperimentResult res;
  res.csv_path = out_dir / (tag + ".csv");
  res.checkpoint_path = out_dir / (tag + "_best.ckpt");
  res.plot_path = out_dir / (tag + ".svg");

  std::ofstream csv(res.csv_path, std::ios::trunc);
  require(static_cast<bool>(csv), "cannot write " + res.csv_path.string());
  csv << kEpochCsvHeader << '\n' << std::flush;

  Trainer trainer(config);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const EpochRecord rec = trainer.run_epoch();
    csv << format_epoch_row(rec) << '\n' << std::flush;
    require(static_cast<bool>(csv), "failed writing " + res.csv_path.string());
    res.records.push_back(rec);
    if (rec.success_rate > res.best_success) {
      res.best_success = rec.success_rate;
      trainer.agent().save_checkpoint(res.checkpoint_path.string());
    }
    if (on_epoch && !on_epoch(rec)) break;
  }

  Series success{tag, {}, {}, {}}, entropy{tag, {}, {}, {}};
  for (const auto& r : res.records) {
    success.x.push_back(static_cast<double>(r.epoch));
    success.mean.push_back(r.success_rate);
    success.stddev.push_back(0.0);
    entropy.x.push_back(static_cast<double>(r.epoch));
    entropy.mean.push_back(r.goal_entropy);
    entropy.stddev.push_back(0.0);
  }
  write_svg(res.plot_path, {Panel{"Mean success rate", "success rate", {success}},
                            Panel{"Achieved-goal entropy", "entropy (nats)", {entropy}}});
  return res;
}

}  // namespace mep

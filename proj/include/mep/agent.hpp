#pragma once

// Goal-conditioned DDPG: the actor and critic both see the normalized
// observation concatenated with the normalized goal (UVFA inputs).

#include <iosfwd>
#include <span>
#include <string>

#include "mep/envs.hpp"
#include "mep/nn.hpp"
#include "mep/replay.hpp"

namespace mep {

// Running mean/std with clipping of the normalized output.
class Normalizer {
 public:
  explicit Normalizer(std::size_t dim = 0, double clip = 5.0, double min_std = 1e-2);

  void update(std::span<const double> x);
  // Folds accumulated sums into mean/std; called once per batch of updates.
  void recompute();
  Vector normalize(std::span<const double> x) const;
  void normalize_into(std::span<const double> x, double* out) const;

  std::size_t dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& stddev() const { return std_; }
  double count() const { return count_; }

  void write(std::ostream& out) const;
  void read(std::istream& in);

 private:
  Vector sum_, sumsq_, mean_, std_;
  double count_ = 0.0;
  double clip_;
  double min_std_;
};

struct AgentConfig {
  std::size_t hidden_layers = 3;
  std::size_t hidden_units = 64;
  double gamma = 0.98;
  double polyak = 0.95;
  double noise_sigma = 0.2;
  double random_eps = 0.3;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double action_l2 = 1.0;
  double norm_clip = 5.0;
};

struct AgentParams {
  MlpParams actor, critic;
  MlpParams actor_target, critic_target;
  AdamState actor_opt, critic_opt;
  double gamma = 0.98;
  double polyak = 0.95;
  double noise_sigma = 0.2;
  double random_eps = 0.3;
};

class Agent {
 public:
  Agent(const EnvSpec& spec, const AgentConfig& config, Rng& init_rng);

  const EnvSpec& spec() const { return spec_; }
  const AgentConfig& config() const { return config_; }
  AgentParams& params() { return params_; }
  const AgentParams& params() const { return params_; }
  Normalizer& obs_normalizer() { return obs_norm_; }
  Normalizer& goal_normalizer() { return goal_norm_; }

  // Deterministic: bound * actor(s || g). Exploring: with probability
  // random_eps a uniform action, otherwise Gaussian noise on the
  // deterministic action; always clamped to the action bound.
  Vector act(const State& state, const GoalVec& goal, bool explore, Rng& rng) const;

  double q_value(const State& state, const GoalVec& goal, std::span<const double> action) const;

  // r + gamma Q'(s', g, pi'(s', g)) clipped to [-1 / (1 - gamma), 0].
  Vector critic_target_value(std::span<const RelabeledSample> batch) const;

  struct Gradients {
    MlpParams critic;
    MlpParams actor;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    Vector td_errors;  // target - Q(s, g, a)
  };
  // Losses are td_weight-weighted means normalized by the total weight.
  Gradients compute_gradients(std::span<const RelabeledSample> batch) const;

  struct UpdateResult {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    Vector abs_td_errors;
  };
  UpdateResult update(std::span<const RelabeledSample> batch);

  // target <- polyak * target + (1 - polyak) * online
  void soft_update_targets();

  // |target - Q| per sample with the same target as training.
  Vector abs_td_errors(std::span<const RelabeledSample> batch) const;

  // Feeds the normalizers with an episode's observations and goals.
  void observe(const Trajectory& trajectory);

  // Actor section, critic section (both MEPNN1), then normalizer statistics.
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  Vector actor_input(const State& state, const GoalVec& goal) const;
  Vector critic_input(const State& state, const GoalVec& goal, std::span<const double> action) const;

  EnvSpec spec_;
  AgentConfig config_;
  AgentParams params_;
  Normalizer obs_norm_;
  Normalizer goal_norm_;
};

}  // namespace mep

#include "mep/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mep {

Normalizer::Normalizer(std::size_t dim, double clip, double min_std)
    : sum_(dim, 0.0), sumsq_(dim, 0.0), mean_(dim, 0.0), std_(dim, 1.0), clip_(clip), min_std_(min_std) {}

void Normalizer::update(std::span<const double> x) {
  require_shape(x.size() == dim(), "normalizer input dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) {
    sum_[j] += x[j];
    sumsq_[j] += x[j] * x[j];
  }
  count_ += 1.0;
}

void Normalizer::recompute() {
  if (count_ <= 0.0) return;
  for (std::size_t j = 0; j < dim(); ++j) {
    mean_[j] = sum_[j] / count_;
    const double var = sumsq_[j] / count_ - mean_[j] * mean_[j];
    std_[j] = std::sqrt(std::max(min_std_ * min_std_, var));
  }
}

void Normalizer::normalize_into(std::span<const double> x, double* out) const {
  require_shape(x.size() == dim(), "normalizer input dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = std::clamp((x[j] - mean_[j]) / std_[j], -clip_, clip_);
}

Vector Normalizer::normalize(std::span<const double> x) const {
  Vector out(x.size());
  normalize_into(x, out.data());
  return out;
}

void Normalizer::write(std::ostream& out) const {
  binio::write_magic(out, "MEPNRM");
  binio::write_u64(out, dim());
  binio::write_f64(out, count_);
  for (const Vector* v : {&sum_, &sumsq_, &mean_, &std_})
    for (double x : *v) binio::write_f64(out, x);
}

void Normalizer::read(std::istream& in) {
  binio::expect_magic(in, "MEPNRM");
  const auto d = binio::read_u64(in);
  require(d == dim(), "normalizer dimension in checkpoint does not match");
  count_ = binio::read_f64(in);
  for (Vector* v : {&sum_, &sumsq_, &mean_, &std_})
    for (double& x : *v) x = binio::read_f64(in);
}

Agent::Agent(const EnvSpec& spec, const AgentConfig& config, Rng& init_rng)
    : spec_(spec),
      config_(config),
      obs_norm_(spec.state_dim, config.norm_clip),
      goal_norm_(spec.goal_dim, config.norm_clip) {
  spec_.validate();
  require(config.gamma >= 0.0 && config.gamma < 1.0, "gamma must lie in [0, 1)");
  require(config.polyak >= 0.0 && config.polyak <= 1.0, "polyak must lie in [0, 1]");
  require(config.hidden_layers > 0 && config.hidden_units > 0, "networks need hidden layers");

  std::vector<std::size_t> actor_sizes{spec.state_dim + spec.goal_dim};
  std::vector<std::size_t> critic_sizes{spec.state_dim + spec.goal_dim + spec.action_dim};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) {
    actor_sizes.push_back(config.hidden_units);
    critic_sizes.push_back(config.hidden_units);
  }
  actor_sizes.push_back(spec.action_dim);
  critic_sizes.push_back(1);

  params_.actor = MlpParams::random(actor_sizes, Activation::relu, Activation::tanh, init_rng);
  params_.critic = MlpParams::random(critic_sizes, Activation::relu, Activation::identity, init_rng);
  params_.actor_target = params_.actor;
  params_.critic_target = params_.critic;
  params_.actor_opt = AdamState::for_params(params_.actor, config.actor_lr);
  params_.critic_opt = AdamState::for_params(params_.critic, config.critic_lr);
  params_.gamma = config.gamma;
  params_.polyak = config.polyak;
  params_.noise_sigma = config.noise_sigma;
  params_.random_eps = config.random_eps;
}

Vector Agent::actor_input(const State& state, const GoalVec& goal) const {
  const Vector s = state.full();
  require_shape(s.size() == spec_.state_dim && goal.size() == spec_.goal_dim,
                "state/goal dimensions do not match the environment");
  Vector in(spec_.state_dim + spec_.goal_dim);
  obs_norm_.normalize_into(s, in.data());
  goal_norm_.normalize_into(goal, in.data() + spec_.state_dim);
  return in;
}

Vector Agent::critic_input(const State& state, const GoalVec& goal,
                           std::span<const double> action) const {
  require_shape(action.size() == spec_.action_dim, "action dimension mismatch");
  Vector in = actor_input(state, goal);
  for (double a : action) in.push_back(a / spec_.action_bound);
  return in;
}

Vector Agent::act(const State& state, const GoalVec& goal, bool explore, Rng& rng) const {
  const double bound = spec_.action_bound;
  Vector a = mlp_forward(params_.actor, actor_input(state, goal));
  for (auto& v : a) v *= bound;
  if (!explore) return a;
  if (uniform01(rng) < params_.random_eps) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : a) v = dist(rng);
    return a;
  }
  std::normal_distribution<double> noise(0.0, params_.noise_sigma * bound);
  for (auto& v : a) v = std::clamp(v + noise(rng), -bound, bound);
  return a;
}

double Agent::q_value(const State& state, const GoalVec& goal, std::span<const double> action) const {
  return mlp_forward(params_.critic, critic_input(state, goal, action))[0];
}

Vector Agent::critic_target_value(std::span<const RelabeledSample> batch) const {
  const double lo = -1.0 / (1.0 - params_.gamma);
  Vector y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    const Vector in = actor_input(s.next_state, s.goal);
    Vector a = mlp_forward(params_.actor_target, in);
    Vector cin = in;
    cin.insert(cin.end(), a.begin(), a.end());  // actor output is already action / bound
    const double q = mlp_forward(params_.critic_target, cin)[0];
    y[i] = std::clamp(s.reward + params_.gamma * q, lo, 0.0);
  }
  return y;
}

Agent::Gradients Agent::compute_gradients(std::span<const RelabeledSample> batch) const {
  require(!batch.empty(), "agent update needs a non-empty batch");
  Gradients g{params_.critic.zeros_like(), params_.actor.zeros_like(), 0.0, 0.0, {}};
  double total_w = 0.0;
  for (const auto& s : batch) {
    require(std::isfinite(s.td_weight) && s.td_weight >= 0.0, "td_weight must be finite and >= 0");
    total_w += s.td_weight;
  }
  require(total_w > 0.0, "batch has zero total td_weight");

  const Vector y = critic_target_value(batch);
  g.td_errors.resize(batch.size());
  const std::size_t adim = spec_.action_dim;
  ForwardCache critic_cache, actor_cache, policy_critic_cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    const double w = s.td_weight / total_w;

    // Critic regression on the stored action.
    const Vector cin = critic_input(s.state, s.goal, s.action);
    const double q = mlp_forward(params_.critic, cin, critic_cache)[0];
    const double err = q - y[i];
    g.td_errors[i] = y[i] - q;
    g.critic_loss += w * err * err;
    const double up = 2.0 * w * err;
    mlp_backward_accumulate(params_.critic, critic_cache, std::span<const double>(&up, 1), g.critic);

    // Actor ascends Q through the critic; action_l2 penalizes saturation.
    const Vector ain = actor_input(s.state, s.goal);
    const Vector u = mlp_forward(params_.actor, ain, actor_cache);
    Vector pin = ain;
    pin.insert(pin.end(), u.begin(), u.end());
    const double qpi = mlp_forward(params_.critic, pin, policy_critic_cache)[0];
    const double one = 1.0;
    const Vector dq = mlp_input_gradient(params_.critic, policy_critic_cache, std::span<const double>(&one, 1));
    double l2 = 0.0;
    Vector upstream(adim);
    for (std::size_t j = 0; j < adim; ++j) {
      l2 += u[j] * u[j];
      upstream[j] = w * (-dq[dq.size() - adim + j] + 2.0 * config_.action_l2 * u[j]);
    }
    g.actor_loss += w * (-qpi + config_.action_l2 * l2);
    mlp_backward_accumulate(params_.actor, actor_cache, upstream, g.actor);
  }
  return g;
}

Agent::UpdateResult Agent::update(std::span<const RelabeledSample> batch) {
  Gradients g = compute_gradients(batch);
  require(std::isfinite(g.critic_loss) && std::isfinite(g.actor_loss),
          "non-finite loss; update aborted");
  adam_step(params_.critic, g.critic, params_.critic_opt);
  adam_step(params_.actor, g.actor, params_.actor_opt);
  UpdateResult r;
  r.critic_loss = g.critic_loss;
  r.actor_loss = g.actor_loss;
  r.abs_td_errors.resize(g.td_errors.size());
  for (std::size_t i = 0; i < g.td_errors.size(); ++i) r.abs_td_errors[i] = std::abs(g.td_errors[i]);
  return r;
}

void Agent::soft_update_targets() {
  const double k = params_.polyak;
  auto blend = [k](MlpParams& target, const MlpParams& online) {
    for (std::size_t l = 0; l < target.num_layers(); ++l) {
      auto& tw = target.weights[l].data;
      const auto& ow = online.weights[l].data;
      for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = k * tw[i] + (1.0 - k) * ow[i];
      auto& tb = target.biases[l];
      const auto& ob = online.biases[l];
      for (std::size_t i = 0; i < tb.size(); ++i) tb[i] = k * tb[i] + (1.0 - k) * ob[i];
    }
  };
  blend(params_.actor_target, params_.actor);
  blend(params_.critic_target, params_.critic);
}

Vector Agent::abs_td_errors(std::span<const RelabeledSample> batch) const {
  const Vector y = critic_target_value(batch);
  Vector out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    out[i] = std::abs(y[i] - q_value(s.state, s.goal, s.action));
  }
  return out;
}

void Agent::observe(const Trajectory& trajectory) {
  for (const auto& s : trajectory.states) obs_norm_.update(s.full());
  for (const auto& g : trajectory.achieved_goals) goal_norm_.update(g);
  goal_norm_.update(trajectory.env_goal);
  obs_norm_.recompute();
  goal_norm_.recompute();
}

void Agent::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path + " for writing");
  write_mlp(out, params_.actor);
  write_mlp(out, params_.critic);
  obs_norm_.write(out);
  goal_norm_.write(out);
  require(static_cast<bool>(out), "failed writing " + path);
}

void Agent::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  MlpParams actor = read_mlp(in, Activation::relu, Activation::tanh);
  MlpParams critic = read_mlp(in, Activation::relu, Activation::identity);
  require_shape(actor.same_shape(params_.actor) && critic.same_shape(params_.critic),
                "checkpoint network shapes do not match this agent");
  obs_norm_.read(in);
  goal_norm_.read(in);
  params_.actor = actor;
  params_.critic = critic;
  params_.actor_target = std::move(actor);
  params_.critic_target = std::move(critic);
}

}  // namespace mep

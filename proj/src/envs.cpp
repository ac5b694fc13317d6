#include "mep/envs.hpp"

#include <algorithm>
#include <cmath>

namespace mep {

Vector State::full() const {
  Vector s = achieved_goal;
  s.insert(s.end(), context.begin(), context.end());
  return s;
}

void EnvSpec::validate() const {
  require(state_dim > 0 && goal_dim > 0 && action_dim > 0, "env dimensions must be positive");
  require(horizon >= 2, "horizon must be at least 2");
  require(tolerance > 0.0, "tolerance must be strictly positive");
  require(action_bound > 0.0, "action bound must be positive");
}

double compute_reward(std::span<const double> achieved, std::span<const double> desired,
                      const EnvSpec& spec) {
  require_shape(achieved.size() == desired.size() && achieved.size() == spec.goal_dim,
                "goal dimension mismatch in compute_reward");
  double sq = 0.0;
  for (std::size_t i = 0; i < achieved.size(); ++i) {
    const double d = achieved[i] - desired[i];
    sq += d * d;
  }
  return std::sqrt(sq) <= spec.tolerance ? 0.0 : -1.0;
}

ReachEnv::ReachEnv(std::string name, EnvSpec spec, Dynamics dynamics)
    : name_(std::move(name)), spec_(spec), dyn_(dynamics) {
  spec_.validate();
  require(spec_.goal_dim == 2 && spec_.action_dim == 2 && spec_.state_dim == 4,
          "reach environments are planar");
}

ReachEnv::Reset ReachEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  goal_ = {uniform01(rng), uniform01(rng)};
  state_.achieved_goal = {0.5, 0.5};
  state_.context = {0.0, 0.0};
  t_ = 0;
  started_ = true;
  return {state_, goal_};
}

StepResult ReachEnv::step(std::span<const double> action) {
  require(started_, "step called before reset");
  require(t_ < spec_.horizon, "episode already finished; call reset");
  require_shape(action.size() == spec_.action_dim, "action dimension mismatch");

  const double bound = spec_.action_bound;
  double a[2];
  for (int i = 0; i < 2; ++i) {
    const double v = std::isfinite(action[i]) ? action[i] : 0.0;
    a[i] = std::clamp(v, -bound, bound);
  }
  auto& pos = state_.achieved_goal;
  pos[0] = std::clamp(pos[0] + dyn_.speed * a[0] + dyn_.drift_x, 0.0, 1.0);
  pos[1] = std::clamp(pos[1] + dyn_.speed * a[1] + dyn_.drift_y, 0.0, 1.0);
  state_.context = {a[0], a[1]};
  ++t_;

  StepResult r;
  r.state = state_;
  r.reward = compute_reward(pos, goal_, spec_);
  r.is_success = r.reward == 0.0;
  r.done = t_ == spec_.horizon;
  return r;
}

bool is_known_env(const std::string& name) {
  return name == "point_reach" || name == "drift_reach";
}

std::unique_ptr<ReachEnv> make_env(const std::string& name) {
  if (name == "point_reach") return std::make_unique<ReachEnv>(name, EnvSpec{}, ReachEnv::Dynamics{});
  if (name == "drift_reach")
    return std::make_unique<ReachEnv>(name, EnvSpec{}, ReachEnv::Dynamics{0.05, -0.02, 0.0});
  throw Error("unknown environment '" + name + "' (expected point_reach or drift_reach)");
}

}  // namespace mep

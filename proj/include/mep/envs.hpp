#pragma once

#include <memory>
#include <span>
#include <string>

#include "mep/common.hpp"

namespace mep {

using GoalVec = Vector;

// Full observation is achieved_goal followed by context.
struct State {
  GoalVec achieved_goal;
  Vector context;

  Vector full() const;
  bool operator==(const State&) const = default;
};

struct EnvSpec {
  std::size_t state_dim = 4;
  std::size_t goal_dim = 2;
  std::size_t action_dim = 2;
  std::size_t horizon = 50;
  double tolerance = 0.05;
  double action_bound = 1.0;

  void validate() const;
};

// Sparse reward: 0 inside the (closed) tolerance ball, -1 outside.
double compute_reward(std::span<const double> achieved, std::span<const double> desired,
                      const EnvSpec& spec);

struct StepResult {
  State state;
  double reward = -1.0;
  bool done = false;
  bool is_success = false;
};

// Point mass in the unit square under direct velocity control, with an
// optional constant drift added every step. Episodes always run for
// exactly `horizon` steps.
class ReachEnv {
 public:
  struct Dynamics {
    double speed = 0.05;
    double drift_x = 0.0;
    double drift_y = 0.0;
  };

  ReachEnv(std::string name, EnvSpec spec, Dynamics dynamics);

  const std::string& name() const { return name_; }
  const EnvSpec& spec() const { return spec_; }

  struct Reset {
    State state;
    GoalVec goal;
  };
  Reset reset(std::uint64_t seed);
  StepResult step(std::span<const double> action);

  std::size_t elapsed() const { return t_; }
  const GoalVec& goal() const { return goal_; }

 private:
  std::string name_;
  EnvSpec spec_;
  Dynamics dyn_;
  State state_;
  GoalVec goal_;
  std::size_t t_ = 0;
  bool started_ = false;
};

// "point_reach" or "drift_reach".
std::unique_ptr<ReachEnv> make_env(const std::string& name);
bool is_known_env(const std::string& name);

}  // namespace mep

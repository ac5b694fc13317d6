#pragma once

// Episodic replay: storage, hindsight relabeling and the three trajectory /
// transition selection rules (uniform, rank-prioritized MEP, sum-tree PER).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mep/common.hpp"
#include "mep/envs.hpp"
#include "mep/sum_tree.hpp"

namespace mep {

struct Trajectory {
  std::vector<State> states;           // T + 1
  std::vector<Vector> actions;         // T
  Vector rewards;                      // T
  GoalVec env_goal;
  std::vector<GoalVec> achieved_goals;  // T + 1, mirrors states[t].achieved_goal
  std::uint64_t id = 0;

  std::size_t horizon() const { return actions.size(); }
  // Throws Error when sequence lengths disagree or achieved goals drift from states.
  void validate() const;
};

// Fixed-capacity ring of trajectories; evicts oldest first. Logical index 0
// is always the oldest stored trajectory.
class EpisodicBuffer {
 public:
  explicit EpisodicBuffer(std::size_t capacity);

  // Assigns the next insertion id and returns the ring slot written.
  std::size_t store_episode(Trajectory trajectory);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool empty() const { return size_ == 0; }
  // Horizon shared by every stored trajectory; 0 while empty.
  std::size_t horizon() const { return horizon_; }

  const Trajectory& at(std::size_t logical) const { return slots_[slot_of(logical)]; }
  std::size_t slot_of(std::size_t logical) const;
  const Trajectory& in_slot(std::size_t slot) const { return slots_.at(slot); }
  std::uint64_t next_id() const { return next_id_; }

 private:
  std::vector<Trajectory> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::size_t horizon_ = 0;
  std::uint64_t next_id_ = 0;
};

// Per-trajectory priorities in buffer (logical) order.
struct PriorityTable {
  Vector density;             // model density of each trajectory
  Vector normalized_prob;     // density / sum(density)
  Vector proposal_prob;       // p(1 - p) / Z
  std::vector<std::size_t> rank;  // 1 = most common, N = rarest
  Vector sample_prob;         // rank / (N (N + 1) / 2)
  double normalization = 0.0;  // Z
  bool uniform_fallback = false;

  std::vector<std::uint64_t> ids;
  Vector cumulative;

  std::size_t size() const { return sample_prob.size(); }
  // Logical index drawn according to sample_prob.
  std::size_t sample(Rng& rng) const;
  bool matches(const EpisodicBuffer& buffer) const;
};

PriorityTable compute_priorities(const EpisodicBuffer& buffer, std::span<const double> densities);
// Same ranking from log-densities; normalization is done with log-sum-exp so
// densities of high-dimensional features may over/underflow safely.
PriorityTable compute_priorities_from_log(const EpisodicBuffer& buffer,
                                          std::span<const double> log_densities);

struct RelabeledSample {
  State state;
  Vector action;
  State next_state;
  GoalVec goal;
  double reward = -1.0;
  double td_weight = 1.0;
  std::size_t trajectory = 0;  // logical buffer index
  std::size_t timestep = 0;
  std::size_t transition = 0;  // slot * T + timestep, PER addressing
};

enum class RelabelStrategy { future };

// With probability relabel_prob the goal becomes achieved_goals[t'] with t'
// uniform in {t+1, ..., T}; the reward is always recomputed.
RelabeledSample her_relabel(const Trajectory& trajectory, std::size_t t, Rng& rng,
                            double relabel_prob, const EnvSpec& spec,
                            RelabelStrategy strategy = RelabelStrategy::future);

// Proportional prioritization over transitions backed by a sum-tree.
class PerSampler {
 public:
  PerSampler(std::size_t buffer_capacity, std::size_t horizon, double alpha = 0.6,
             double priority_floor = 1e-6);

  // New transitions enter with the largest priority seen so far.
  void on_store(std::size_t slot);
  // |td_error| + floor, raised to alpha.
  void update_priorities(std::span<const std::size_t> transitions, std::span<const double> td_errors);

  struct Pick {
    std::size_t transition;
    double weight;
  };
  // Weights (N P)^-beta normalized by the batch maximum.
  std::vector<Pick> sample(std::size_t batch_size, Rng& rng, double beta,
                           std::size_t stored_transitions) const;

  const SumTree& tree() const { return tree_; }
  std::size_t horizon() const { return horizon_; }
  double alpha() const { return alpha_; }

 private:
  SumTree tree_;
  std::size_t horizon_;
  double alpha_;
  double floor_;
  double max_priority_ = 1.0;
};

enum class SamplingStrategy { uniform, mep, per };

struct SampleConfig {
  SamplingStrategy strategy = SamplingStrategy::uniform;
  bool her = false;
  double relabel_prob = 0.8;
  double per_beta = 0.4;
};

std::vector<RelabeledSample> sample_batch(const EpisodicBuffer& buffer, const SampleConfig& config,
                                          std::size_t batch_size, Rng& rng, const EnvSpec& spec,
                                          const PriorityTable* priority_table = nullptr,
                                          const PerSampler* per = nullptr);

}  // namespace mep

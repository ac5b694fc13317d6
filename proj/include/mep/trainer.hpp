#pragma once

// Training loop: collect episodes, prioritize, update the agent, refit the
// trajectory density once per epoch, evaluate and log.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mep/agent.hpp"
#include "mep/density.hpp"
#include "mep/envs.hpp"
#include "mep/replay.hpp"

namespace mep {

enum class Method { ddpg, ddpg_her, ddpg_mep, ddpg_her_mep, ddpg_per, ddpg_her_per };

std::string to_string(Method method);
Method parse_method(const std::string& name);
bool uses_her(Method method);
SamplingStrategy sampling_strategy(Method method);

struct TrainConfig {
  std::string env = "point_reach";
  Method method = Method::ddpg_her;
  std::size_t epochs = 50;
  std::size_t episodes_per_epoch = 20;
  // Each epoch is split into cycles of (collect, optimize, soft-update).
  std::size_t cycles_per_epoch = 10;
  std::size_t optimization_steps = 400;  // per epoch, 40 per cycle by default
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 10000;
  std::size_t eval_episodes = 10;

  std::size_t mog_components = 3;
  std::size_t mog_iters = 50;
  double mog_tol = 1e-4;

  double relabel_prob = 0.8;

  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;

  std::size_t pearson_every = 5;
  std::size_t entropy_grid = 10;

  AgentConfig agent;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t env_steps = 0;
  double success_rate = 0.0;
  double goal_entropy = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::optional<double> pearson_r;
  double wall_seconds = 0.0;
  bool density_fallback = false;
};

using Policy = std::function<Vector(const State&, const GoalVec&)>;

// Fraction of episodes whose final step is a success; seeds seed, seed+1, ...
double evaluate_policy(const Policy& policy, ReachEnv& env, std::size_t n_episodes,
                       std::uint64_t seed);
double evaluate(const Agent& agent, ReachEnv& env, std::size_t n_episodes, std::uint64_t seed);

// Sample Pearson correlation; empty when either side has zero variance.
std::optional<double> pearson_correlation(std::span<const double> x, std::span<const double> y);

// Correlation between 1 - p_i and the mean |TD-error| of trajectory i under
// its original goal.
std::optional<double> pearson_diagnostic(const EpisodicBuffer& buffer, const PriorityTable& table,
                                         const Agent& agent);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  EpochRecord run_epoch();

  // One episode with the current policy, not stored.
  Trajectory rollout(bool explore, std::uint64_t reset_seed);
  // Stores a trajectory and feeds normalizers and PER.
  void store(Trajectory trajectory);

  // Rebuilds the MEP table from the current density model; uniform when no
  // model has been fitted yet.
  void rebuild_priorities();
  // Refits standardizer and mixture on the whole buffer. Returns false and
  // drops the model when the fit fails.
  bool refit_density();

  // Agent updates with the configured sampling rule.
  std::pair<double, double> optimize(std::size_t steps);

  const TrainConfig& config() const { return config_; }
  Agent& agent() { return *agent_; }
  const Agent& agent() const { return *agent_; }
  const EpisodicBuffer& buffer() const { return buffer_; }
  const std::optional<PriorityTable>& priority_table() const { return table_; }
  const std::optional<MoGParams>& density_model() const { return density_; }
  const Standardizer& standardizer() const { return standardizer_; }
  ReachEnv& env() { return *env_; }
  std::size_t epoch() const { return epoch_; }
  std::uint64_t env_steps() const { return env_steps_; }

 private:
  double current_beta() const;

  TrainConfig config_;
  std::unique_ptr<ReachEnv> env_;
  std::unique_ptr<ReachEnv> eval_env_;
  std::unique_ptr<Agent> agent_;
  EpisodicBuffer buffer_;
  std::optional<PerSampler> per_;
  std::optional<PriorityTable> table_;
  std::optional<MoGParams> density_;
  Standardizer standardizer_;
  Rng rng_;
  std::size_t epoch_ = 0;
  std::uint64_t env_steps_ = 0;
};

// Exact CSV header of per-epoch logs.
inline constexpr const char* kEpochCsvHeader =
    "epoch,env_steps,success_rate,goal_entropy,critic_loss,actor_loss,pearson_r,wall_seconds";

std::string format_epoch_row(const EpochRecord& record);

struct ExperimentResult {
  std::vector<EpochRecord> records;
  std::filesystem::path csv_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path plot_path;
  double best_success = -1.0;
};

// Runs every epoch, appending and flushing one CSV row per epoch. The
// optional hook returns false to stop early; rows written so far stay valid.
ExperimentResult run_experiment(const TrainConfig& config, const std::filesystem::path& out_dir,
                                const std::string& tag = "run",
                                const std::function<bool(const EpochRecord&)>& on_epoch = {});

}  // namespace mep

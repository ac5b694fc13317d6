#pragma once

// Mixture-of-Gaussians density over flattened achieved-goal trajectories and
// the histogram estimator of the achieved-goal entropy.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mep/common.hpp"
#include "mep/replay.hpp"

namespace mep {

// Per-dimension affine standardization of flattened goal trajectories.
struct Standardizer {
  std::size_t horizon = 0;   // T
  std::size_t goal_dim = 0;  // d
  Vector mean;
  Vector scale;  // floored at kMinScale

  static constexpr double kMinScale = 1e-8;

  static Standardizer identity(std::size_t horizon, std::size_t goal_dim);
  // Statistics over every trajectory currently in the buffer.
  static Standardizer fit(const EpisodicBuffer& buffer);

  std::size_t feature_size() const { return (horizon + 1) * goal_dim; }
};

struct TrajectoryFeature {
  Vector values;
};

// Row-major concatenation of achieved_goals[0..T].
Vector flatten_goals(const Trajectory& trajectory);
TrajectoryFeature featurize(const Trajectory& trajectory, const Standardizer& standardizer);
Vector unstandardize(const TrajectoryFeature& feature, const Standardizer& standardizer);

// Diagonal-covariance mixture. The mixture is already normalized, so no
// extra partition factor is applied.
struct MoGParams {
  Vector mixing;
  std::vector<Vector> means;
  std::vector<Vector> variances;

  std::size_t components() const { return mixing.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  void validate() const;
};

struct MogFitOptions {
  std::size_t components = 3;
  std::uint64_t seed = 0;
  std::size_t max_iters = 50;
  double tol = 1e-4;
  double variance_floor = 1e-6;
};

struct MogFit {
  MoGParams params;
  // Mean per-sample log-likelihood after initialization and after each M-step.
  Vector log_likelihood;
  std::size_t iterations = 0;
  bool converged = false;
  bool components_clamped = false;
  bool monotone = true;
};

MogFit fit_mog(std::span<const Vector> features, const MogFitOptions& options);

double mog_log_density(const MoGParams& params, std::span<const double> feature);
double mog_density(const MoGParams& params, std::span<const double> feature);

// "MEPGM1", u64 K, u64 dim, then mixing, means, variances as little-endian f64.
void write_mog(std::ostream& out, const MoGParams& params);
MoGParams read_mog(std::istream& in);

// Discrete entropy (nats) of goals binned on a resolution^d grid over
// [lo, hi]^d; only occupied cells contribute.
double goal_entropy_estimate(std::span<const GoalVec> goals, std::size_t grid_resolution,
                             double lo = 0.0, double hi = 1.0);
// Histogram entropy of the final achieved goal of every buffered trajectory.
double buffer_goal_entropy(const EpisodicBuffer& buffer, std::size_t grid_resolution = 10);

}  // namespace mep

#include "mep/density.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "mep/nn.hpp"

namespace mep {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_sum_exp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - top);
  return top + std::log(sum);
}

// Cached per-component quantities for fast evaluation.
struct ComponentCache {
  std::vector<Vector> inv_var;
  Vector log_norm;  // log c_k - 0.5 (D log 2pi + sum log var)

  explicit ComponentCache(const MoGParams& p) {
    const std::size_t K = p.components();
    const std::size_t D = p.dim();
    inv_var.resize(K);
    log_norm.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      inv_var[k].resize(D);
      double log_det = 0.0;
      for (std::size_t j = 0; j < D; ++j) {
        inv_var[k][j] = 1.0 / p.variances[k][j];
        log_det += std::log(p.variances[k][j]);
      }
      log_norm[k] = (p.mixing[k] > 0.0 ? std::log(p.mixing[k])
                                       : -std::numeric_limits<double>::infinity()) -
                    0.5 * (static_cast<double>(D) * kLog2Pi + log_det);
    }
  }

  // log c_k N(x | mu_k, Sigma_k) for every k.
  void joint(const MoGParams& p, std::span<const double> x, Vector& out) const {
    const std::size_t K = p.components();
    out.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      if (!std::isfinite(log_norm[k])) {
        out[k] = log_norm[k];
        continue;
      }
      const Vector& mu = p.means[k];
      const Vector& iv = inv_var[k];
      double maha = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - mu[j];
        maha += d * d * iv[j];
      }
      out[k] = log_norm[k] - 0.5 * maha;
    }
  }
};

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// k-means++ style seeding: first centre uniform, then proportional to the
// squared distance to the nearest chosen centre.
std::vector<Vector> seed_centres(std::span<const Vector> xs, std::size_t K, Rng& rng) {
  const std::size_t n = xs.size();
  std::vector<Vector> centres;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centres.push_back(xs[first(rng)]);
  Vector d2(n, std::numeric_limits<double>::infinity());
  while (centres.size() < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(xs[i], centres.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    } else {
      pick = first(rng);
    }
    centres.push_back(xs[pick]);
  }
  return centres;
}

// Returns mean log-likelihood; fills responsibilities (n x K, row-major).
double expectation(const MoGParams& p, std::span<const Vector> xs, Vector& resp) {
  const std::size_t K = p.components();
  const ComponentCache cache(p);
  resp.resize(xs.size() * K);
  Vector joint;
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cache.joint(p, xs[i], joint);
    const double lse = log_sum_exp(joint);
    total += lse;
    for (std::size_t k = 0; k < K; ++k) resp[i * K + k] = std::exp(joint[k] - lse);
  }
  return total / static_cast<double>(xs.size());
}

void maximization(MoGParams& p, std::span<const Vector> xs, const Vector& resp, double floor) {
  const std::size_t K = p.components();
  const std::size_t D = p.dim();
  const std::size_t n = xs.size();
  for (std::size_t k = 0; k < K; ++k) {
    double nk = 0.0;
    for (std::size_t i = 0; i < n; ++i) nk += resp[i * K + k];
    p.mixing[k] = nk / static_cast<double>(n);
    if (nk <= 0.0) continue;  // dead component keeps its shape, weight 0
    Vector mu(D, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp[i * K + k];
      if (r == 0.0) continue;
      for (std::size_t j = 0; j < D; ++j) mu[j] += r * xs[i][j];
    }
    for (auto& m : mu) m /= nk;
    Vector var(D, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp[i * K + k];
      if (r == 0.0) continue;
      for (std::size_t j = 0; j < D; ++j) {
        const double d = xs[i][j] - mu[j];
        var[j] += r * d * d;
      }
    }
    for (auto& v : var) v = std::max(v / nk, floor);
    p.means[k] = std::move(mu);
    p.variances[k] = std::move(var);
  }
}

}  // namespace

Standardizer Standardizer::identity(std::size_t horizon, std::size_t goal_dim) {
  Standardizer s;
  s.horizon = horizon;
  s.goal_dim = goal_dim;
  s.mean.assign(s.feature_size(), 0.0);
  s.scale.assign(s.feature_size(), 1.0);
  return s;
}

Standardizer Standardizer::fit(const EpisodicBuffer& buffer) {
  require(!buffer.empty(), "cannot fit a standardizer on an empty buffer");
  Standardizer s;
  s.horizon = buffer.horizon();
  s.goal_dim = buffer.at(0).env_goal.size();
  const std::size_t D = s.feature_size();
  const double n = static_cast<double>(buffer.size());
  s.mean.assign(D, 0.0);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Vector f = flatten_goals(buffer.at(i));
    for (std::size_t j = 0; j < D; ++j) s.mean[j] += f[j];
  }
  for (auto& m : s.mean) m /= n;
  Vector var(D, 0.0);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const Vector f = flatten_goals(buffer.at(i));
    for (std::size_t j = 0; j < D; ++j) var[j] += (f[j] - s.mean[j]) * (f[j] - s.mean[j]);
  }
  s.scale.resize(D);
  for (std::size_t j = 0; j < D; ++j) s.scale[j] = std::max(std::sqrt(var[j] / n), kMinScale);
  return s;
}

Vector flatten_goals(const Trajectory& trajectory) {
  Vector flat;
  for (const auto& g : trajectory.achieved_goals) flat.insert(flat.end(), g.begin(), g.end());
  return flat;
}

TrajectoryFeature featurize(const Trajectory& trajectory, const Standardizer& standardizer) {
  require_shape(trajectory.achieved_goals.size() == standardizer.horizon + 1,
                "trajectory length does not match the standardizer horizon");
  Vector flat = flatten_goals(trajectory);
  require_shape(flat.size() == standardizer.feature_size(), "goal dimension mismatch in featurize");
  for (std::size_t j = 0; j < flat.size(); ++j)
    flat[j] = (flat[j] - standardizer.mean[j]) / standardizer.scale[j];
  return {std::move(flat)};
}

Vector unstandardize(const TrajectoryFeature& feature, const Standardizer& standardizer) {
  require_shape(feature.values.size() == standardizer.feature_size(), "feature length mismatch");
  Vector out(feature.values.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = feature.values[j] * standardizer.scale[j] + standardizer.mean[j];
  return out;
}

void MoGParams::validate() const {
  const std::size_t K = components();
  require_shape(K > 0 && means.size() == K && variances.size() == K, "mixture component count mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    require(mixing[k] >= 0.0, "negative mixing weight");
    sum += mixing[k];
    require_shape(means[k].size() == dim() && variances[k].size() == dim(),
                  "mixture component dimension mismatch");
    for (double v : variances[k]) require(v > 0.0 && std::isfinite(v), "variances must be positive");
  }
  require(std::abs(sum - 1.0) < 1e-9, "mixing weights must sum to one");
}

MogFit fit_mog(std::span<const Vector> features, const MogFitOptions& options) {
  require(!features.empty(), "cannot fit a mixture to an empty feature set");
  require(options.components > 0, "mixture needs at least one component");
  const std::size_t n = features.size();
  const std::size_t D = features.front().size();
  for (const auto& f : features) require_shape(f.size() == D, "features differ in length");

  MogFit fit;
  std::size_t K = options.components;
  if (n < K) {
    K = n;
    fit.components_clamped = true;
  }

  Rng rng(options.seed);
  MoGParams& p = fit.params;
  p.means = seed_centres(features, K, rng);
  p.mixing.assign(K, 1.0 / static_cast<double>(K));
  // Start every component at the global per-dimension variance.
  Vector mean(D, 0.0), var(D, 0.0);
  for (const auto& f : features)
    for (std::size_t j = 0; j < D; ++j) mean[j] += f[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& f : features)
    for (std::size_t j = 0; j < D; ++j) var[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  for (auto& v : var) v = std::max(v / static_cast<double>(n), options.variance_floor);
  p.variances.assign(K, var);

  Vector resp;
  double ll = expectation(p, features, resp);
  fit.log_likelihood.push_back(ll);
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    maximization(p, features, resp, options.variance_floor);
    const double next = expectation(p, features, resp);
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    if (next < ll - 1e-9 * (1.0 + std::abs(ll))) fit.monotone = false;
    if (next - ll < options.tol) {
      fit.converged = true;
      break;
    }
    ll = next;
  }
  return fit;
}

double mog_log_density(const MoGParams& params, std::span<const double> feature) {
  require_shape(feature.size() == params.dim(), "feature dimension does not match mixture");
  const ComponentCache cache(params);
  Vector joint;
  cache.joint(params, feature, joint);
  return log_sum_exp(joint);
}

double mog_density(const MoGParams& params, std::span<const double> feature) {
  return std::exp(mog_log_density(params, feature));
}

void write_mog(std::ostream& out, const MoGParams& params) {
  params.validate();
  binio::write_magic(out, "MEPGM1");
  binio::write_u64(out, params.components());
  binio::write_u64(out, params.dim());
  for (double c : params.mixing) binio::write_f64(out, c);
  for (const auto& mu : params.means)
    for (double v : mu) binio::write_f64(out, v);
  for (const auto& var : params.variances)
    for (double v : var) binio::write_f64(out, v);
}

MoGParams read_mog(std::istream& in) {
  binio::expect_magic(in, "MEPGM1");
  const auto K = binio::read_u64(in);
  const auto D = binio::read_u64(in);
  require(K > 0 && K < 4096 && D > 0 && D < (1u << 24), "implausible mixture header");
  MoGParams p;
  p.mixing.resize(K);
  p.means.assign(K, Vector(D));
  p.variances.assign(K, Vector(D));
  for (auto& c : p.mixing) c = binio::read_f64(in);
  for (auto& mu : p.means)
    for (auto& v : mu) v = binio::read_f64(in);
  for (auto& var : p.variances)
    for (auto& v : var) v = binio::read_f64(in);
  p.validate();
  return p;
}

double goal_entropy_estimate(std::span<const GoalVec> goals, std::size_t grid_resolution,
                             double lo, double hi) {
  require(!goals.empty(), "goal entropy needs at least one goal");
  require(grid_resolution >= 2, "grid resolution must be at least 2");
  require(hi > lo, "empty goal box");
  const double res = static_cast<double>(grid_resolution);
  std::map<std::vector<std::size_t>, std::size_t> counts;
  std::vector<std::size_t> cell;
  for (const auto& g : goals) {
    cell.resize(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double u = (g[j] - lo) / (hi - lo);
      const double c = std::clamp(std::floor(u * res), 0.0, res - 1.0);
      cell[j] = static_cast<std::size_t>(c);
    }
    ++counts[cell];
  }
  const double n = static_cast<double>(goals.size());
  double h = 0.0;
  for (const auto& [key, count] : counts) {
    const double p = static_cast<double>(count) / n;
    h -= p * std::log(p);
  }
  return h;
}

double buffer_goal_entropy(const EpisodicBuffer& buffer, std::size_t grid_resolution) {
  std::vector<GoalVec> finals;
  finals.reserve(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) finals.push_back(buffer.at(i).achieved_goals.back());
  return goal_entropy_estimate(finals, grid_resolution);
}

}  // namespace mep

#include "mep/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mep {

void Trajectory::validate() const {
  const std::size_t T = actions.size();
  require(T >= 1, "trajectory has no transitions");
  require(states.size() == T + 1, "trajectory needs T + 1 states");
  require(rewards.size() == T, "trajectory needs T rewards");
  require(achieved_goals.size() == T + 1, "trajectory needs T + 1 achieved goals");
  require(!env_goal.empty(), "trajectory has no environment goal");
  for (std::size_t t = 0; t <= T; ++t) {
    require(achieved_goals[t] == states[t].achieved_goal,
            "achieved_goals[" + std::to_string(t) + "] differs from the state's achieved goal");
    require(achieved_goals[t].size() == env_goal.size(), "goal dimension mismatch in trajectory");
  }
}

EpisodicBuffer::EpisodicBuffer(std::size_t capacity) : slots_(capacity) {
  require(capacity > 0, "buffer capacity must be positive");
}

std::size_t EpisodicBuffer::slot_of(std::size_t logical) const {
  require(logical < size_, "buffer index out of range");
  return (head_ + logical) % slots_.size();
}

std::size_t EpisodicBuffer::store_episode(Trajectory trajectory) {
  trajectory.validate();
  if (horizon_ == 0) horizon_ = trajectory.horizon();
  require(trajectory.horizon() == horizon_, "trajectory horizon differs from buffered episodes");
  trajectory.id = next_id_++;
  std::size_t slot;
  if (size_ < slots_.size()) {
    slot = (head_ + size_) % slots_.size();
    ++size_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % slots_.size();
  }
  slots_[slot] = std::move(trajectory);
  return slot;
}

std::size_t PriorityTable::sample(Rng& rng) const {
  require(!cumulative.empty(), "priority table is empty");
  const double u = uniform01(rng) * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

bool PriorityTable::matches(const EpisodicBuffer& buffer) const {
  if (ids.size() != buffer.size() || ids.empty()) return false;
  return ids.front() == buffer.at(0).id && ids.back() == buffer.at(buffer.size() - 1).id;
}

namespace {

// Shared tail of both constructors: p is already normalized (or all zero).
PriorityTable finish_table(const EpisodicBuffer& buffer, Vector density, Vector normalized,
                           std::span<const double> order_key, bool fallback) {
  const std::size_t n = buffer.size();
  PriorityTable table;
  table.density = std::move(density);
  table.normalized_prob = std::move(normalized);
  table.uniform_fallback = fallback;
  table.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) table.ids[i] = buffer.at(i).id;

  table.proposal_prob.assign(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = table.normalized_prob[i];
    table.proposal_prob[i] = p * (1.0 - p);
    z += table.proposal_prob[i];
  }
  table.normalization = z;
  if (z > 0.0) {
    for (auto& q : table.proposal_prob) q /= z;
  } else {
    table.proposal_prob.assign(n, 1.0 / static_cast<double>(n));
  }

  table.rank.assign(n, 0);
  table.sample_prob.assign(n, 0.0);
  table.cumulative.assign(n, 0.0);
  if (fallback) {
    std::iota(table.rank.begin(), table.rank.end(), std::size_t{1});
    table.sample_prob.assign(n, 1.0 / static_cast<double>(n));
  } else {
    // Most common (highest density) first; older id wins ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (order_key[a] != order_key[b]) return order_key[a] > order_key[b];
      return table.ids[a] < table.ids[b];
    });
    for (std::size_t k = 0; k < n; ++k) table.rank[order[k]] = k + 1;
    const double denom = static_cast<double>(n) * static_cast<double>(n + 1) / 2.0;
    for (std::size_t i = 0; i < n; ++i)
      table.sample_prob[i] = static_cast<double>(table.rank[i]) / denom;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += table.sample_prob[i];
    table.cumulative[i] = acc;
  }
  return table;
}

}  // namespace

PriorityTable compute_priorities(const EpisodicBuffer& buffer, std::span<const double> densities) {
  require(!buffer.empty(), "cannot prioritize an empty buffer");
  require_shape(densities.size() == buffer.size(), "need one density per stored trajectory");
  double sum = 0.0;
  for (double d : densities) {
    require(std::isfinite(d) && d >= 0.0, "densities must be finite and non-negative");
    sum += d;
  }
  Vector density(densities.begin(), densities.end());
  const std::size_t n = density.size();
  Vector normalized(n);
  const bool fallback = sum == 0.0;
  for (std::size_t i = 0; i < n; ++i)
    normalized[i] = fallback ? 1.0 / static_cast<double>(n) : density[i] / sum;
  return finish_table(buffer, std::move(density), std::move(normalized), densities, fallback);
}

PriorityTable compute_priorities_from_log(const EpisodicBuffer& buffer,
                                          std::span<const double> log_densities) {
  require(!buffer.empty(), "cannot prioritize an empty buffer");
  require_shape(log_densities.size() == buffer.size(), "need one density per stored trajectory");
  double top = -std::numeric_limits<double>::infinity();
  for (double l : log_densities) {
    require(!std::isnan(l) && l != std::numeric_limits<double>::infinity(),
            "log-densities must be below +inf");
    top = std::max(top, l);
  }
  const std::size_t n = log_densities.size();
  Vector density(n), normalized(n);
  const bool fallback = top == -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    density[i] = std::exp(log_densities[i]);
    normalized[i] = fallback ? 1.0 : std::exp(log_densities[i] - top);
    sum += normalized[i];
  }
  for (auto& p : normalized) p /= sum;
  return finish_table(buffer, std::move(density), std::move(normalized), log_densities, fallback);
}

RelabeledSample her_relabel(const Trajectory& trajectory, std::size_t t, Rng& rng,
                            double relabel_prob, const EnvSpec& spec, RelabelStrategy strategy) {
  const std::size_t T = trajectory.horizon();
  require(t < T, "relabel timestep out of range");
  require(strategy == RelabelStrategy::future, "unsupported relabel strategy");
  RelabeledSample s;
  s.state = trajectory.states[t];
  s.action = trajectory.actions[t];
  s.next_state = trajectory.states[t + 1];
  s.timestep = t;
  s.goal = trajectory.env_goal;
  if (relabel_prob > 0.0 && uniform01(rng) < relabel_prob) {
    std::uniform_int_distribution<std::size_t> future(t + 1, T);
    s.goal = trajectory.achieved_goals[future(rng)];
  }
  s.reward = compute_reward(s.next_state.achieved_goal, s.goal, spec);
  return s;
}

PerSampler::PerSampler(std::size_t buffer_capacity, std::size_t horizon, double alpha,
                       double priority_floor)
    : tree_(buffer_capacity * horizon), horizon_(horizon), alpha_(alpha), floor_(priority_floor) {
  require(horizon > 0, "PER needs a positive horizon");
  require(alpha >= 0.0, "PER alpha must be non-negative");
  require(priority_floor > 0.0, "PER priority floor must be positive");
}

void PerSampler::on_store(std::size_t slot) {
  const double p = std::pow(max_priority_, alpha_);
  for (std::size_t t = 0; t < horizon_; ++t) tree_.update(slot * horizon_ + t, p);
}

void PerSampler::update_priorities(std::span<const std::size_t> transitions,
                                   std::span<const double> td_errors) {
  require_shape(transitions.size() == td_errors.size(), "one TD-error per transition required");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    require(std::isfinite(td_errors[i]), "non-finite TD-error");
    const double raw = std::abs(td_errors[i]) + floor_;
    max_priority_ = std::max(max_priority_, raw);
    tree_.update(transitions[i], std::pow(raw, alpha_));
  }
}

std::vector<PerSampler::Pick> PerSampler::sample(std::size_t batch_size, Rng& rng, double beta,
                                                 std::size_t stored_transitions) const {
  require(tree_.total() > 0.0, "PER tree is empty");
  std::vector<Pick> picks(batch_size);
  const double total = tree_.total();
  const double n = static_cast<double>(std::max<std::size_t>(stored_transitions, 1));
  double max_w = 0.0;
  for (auto& pick : picks) {
    pick.transition = tree_.find_prefix(uniform01(rng) * total);
    const double prob = tree_.get(pick.transition) / total;
    pick.weight = std::pow(n * prob, -beta);
    max_w = std::max(max_w, pick.weight);
  }
  for (auto& pick : picks) pick.weight /= max_w;
  return picks;
}

std::vector<RelabeledSample> sample_batch(const EpisodicBuffer& buffer, const SampleConfig& config,
                                          std::size_t batch_size, Rng& rng, const EnvSpec& spec,
                                          const PriorityTable* priority_table,
                                          const PerSampler* per) {
  require(!buffer.empty(), "cannot sample from an empty buffer");
  const std::size_t T = buffer.horizon();
  const double relabel = config.her ? config.relabel_prob : 0.0;
  std::vector<RelabeledSample> batch;
  batch.reserve(batch_size);

  auto emit = [&](std::size_t logical, std::size_t t, double weight) {
    RelabeledSample s = her_relabel(buffer.at(logical), t, rng, relabel, spec);
    s.trajectory = logical;
    s.transition = buffer.slot_of(logical) * T + t;
    s.td_weight = weight;
    batch.push_back(std::move(s));
  };
  std::uniform_int_distribution<std::size_t> pick_t(0, T - 1);

  switch (config.strategy) {
    case SamplingStrategy::uniform: {
      std::uniform_int_distribution<std::size_t> pick_traj(0, buffer.size() - 1);
      for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t logical = pick_traj(rng);
        emit(logical, pick_t(rng), 1.0);
      }
      break;
    }
    case SamplingStrategy::mep: {
      require(priority_table != nullptr, "MEP sampling needs a priority table");
      require(priority_table->matches(buffer),
              "stale priority table: it covers " + std::to_string(priority_table->size()) +
                  " trajectories, buffer holds " + std::to_string(buffer.size()));
      for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t logical = priority_table->sample(rng);
        emit(logical, pick_t(rng), 1.0);
      }
      break;
    }
    case SamplingStrategy::per: {
      require(per != nullptr, "PER sampling needs a sum-tree sampler");
      require(per->horizon() == T, "PER sampler horizon differs from buffer");
      const auto picks = per->sample(batch_size, rng, config.per_beta, buffer.size() * T);
      // Map ring slots back to logical indices.
      const std::size_t cap = buffer.capacity();
      const std::size_t head = buffer.slot_of(0);
      for (const auto& pick : picks) {
        const std::size_t slot = pick.transition / T;
        const std::size_t logical = (slot + cap - head) % cap;
        require(logical < buffer.size(), "PER selected an empty buffer slot");
        emit(logical, pick.transition % T, pick.weight);
      }
      break;
    }
  }
  return batch;
}

}  // namespace mep

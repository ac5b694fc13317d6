#include "mep/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace mep {

void validate_interior_simplex(std::span<const double> p) {
  require(!p.empty(), "empty probability vector");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(std::isfinite(p[i]) && p[i] > 0.0 && p[i] < 1.0,
            "probability " + std::to_string(i) + " = " + std::to_string(p[i]) +
                " is not strictly inside (0, 1)");
    sum += p[i];
  }
  require(std::abs(sum - 1.0) <= 1e-9, "probabilities sum to " + std::to_string(sum) + ", not 1");
}

Vector complementary_density(std::span<const double> p) {
  validate_interior_simplex(p);
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = 1.0 - p[i];
  return out;
}

Proposal proposal_distribution(std::span<const double> p) {
  require(p.size() >= 2, "proposal distribution needs at least two outcomes (Z = 0 otherwise)");
  validate_interior_simplex(p);
  Proposal out;
  out.q.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.q[i] = p[i] * (1.0 - p[i]);
    out.normalization += out.q[i];
  }
  for (auto& q : out.q) q /= out.normalization;
  return out;
}

double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

EntropyReport check_entropy_increase(std::span<const double> p) {
  const Proposal prop = proposal_distribution(p);
  EntropyReport r;
  r.entropy_p = shannon_entropy(p);
  r.entropy_q = shannon_entropy(prop.q);
  r.delta = r.entropy_q - r.entropy_p;
  return r;
}

LowerBoundReport check_lower_bound(std::span<const double> p, std::span<const double> returns) {
  validate_interior_simplex(p);
  require_shape(returns.size() == p.size(), "need one return per trajectory");
  bool any_positive = false;
  for (double r : returns) {
    require(std::isfinite(r) && r >= 0.0, "returns must be non-negative (shift sparse returns first)");
    any_positive = any_positive || r > 0.0;
  }
  LowerBoundReport out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.eta_h += p[i] * -std::log(p[i]) * returns[i];
    out.eta_l += p[i] * (1.0 - p[i]) * returns[i];
  }
  out.holds = any_positive ? out.eta_l < out.eta_h : out.eta_l == out.eta_h;
  return out;
}

MajorizationReport check_majorization(std::span<const double> p, double slack) {
  const Proposal prop = proposal_distribution(p);
  Vector ps(p.begin(), p.end());
  Vector qs = prop.q;
  std::sort(ps.begin(), ps.end(), std::greater<>());
  std::sort(qs.begin(), qs.end(), std::greater<>());
  MajorizationReport r;
  r.min_margin = std::numeric_limits<double>::infinity();
  double sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    sp += ps[k];
    sq += qs[k];
    if (sp - sq < r.min_margin) {
      r.min_margin = sp - sq;
      r.worst_cutoff = k + 1;
    }
  }
  r.holds = r.min_margin >= -slack;
  return r;
}

Vector random_interior_simplex(std::size_t n, Rng& rng) {
  require(n >= 2, "interior simplex needs at least two outcomes");
  std::exponential_distribution<double> expo(1.0);
  for (;;) {
    Vector p(n);
    double sum = 0.0;
    for (auto& v : p) {
      v = expo(rng);
      sum += v;
    }
    bool ok = sum > 0.0;
    for (auto& v : p) {
      v /= sum;
      ok = ok && v > 0.0 && v < 1.0;
    }
    if (ok) return p;
  }
}

bool TheorySuiteReport::all_pass() const {
  return entropy_pass == instances && uniform_equality_pass == uniform_cases &&
         bound_pass == instances && majorization_pass == majorization_instances;
}

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& options) {
  TheorySuiteReport rep;
  Rng rng(options.seed);
  rep.instances = options.instances;
  rep.entropy_min_delta = std::numeric_limits<double>::infinity();
  rep.bound_min_margin = std::numeric_limits<double>::infinity();
  rep.majorization_min_margin = std::numeric_limits<double>::infinity();

  std::uniform_int_distribution<std::size_t> n2(2, std::max<std::size_t>(2, options.entropy_max_n));
  for (std::size_t i = 0; i < options.instances; ++i) {
    const Vector p = random_interior_simplex(n2(rng), rng);
    const EntropyReport r = check_entropy_increase(p);
    if (r.delta >= -1e-12) ++rep.entropy_pass;
    if (r.delta > 1e-9) ++rep.nonuniform_strict;
    if (r.delta < rep.entropy_min_delta) {
      rep.entropy_min_delta = r.delta;
      rep.entropy_worst = p;
    }
  }
  for (std::size_t n = 2; n <= std::max<std::size_t>(2, options.entropy_max_n); ++n) {
    const Vector p(n, 1.0 / static_cast<double>(n));
    ++rep.uniform_cases;
    if (std::abs(check_entropy_increase(p).delta) < 1e-9) ++rep.uniform_equality_pass;
  }

  std::uniform_int_distribution<std::size_t> n1(2, std::max<std::size_t>(2, options.bound_max_n));
  for (std::size_t i = 0; i < options.instances; ++i) {
    const Vector p = random_interior_simplex(n1(rng), rng);
    Vector ret(p.size());
    for (auto& r : ret) r = uniform01(rng) < 0.2 ? 0.0 : 50.0 * uniform01(rng);
    if (*std::max_element(ret.begin(), ret.end()) <= 0.0) ret[0] = 1.0;
    const LowerBoundReport r = check_lower_bound(p, ret);
    if (r.holds) ++rep.bound_pass;
    const double margin = r.eta_h - r.eta_l;
    if (margin < rep.bound_min_margin) {
      rep.bound_min_margin = margin;
      rep.bound_worst_p = p;
      rep.bound_worst_r = ret;
    }
  }

  rep.majorization_instances = options.majorization_instances;
  for (std::size_t i = 0; i < options.majorization_instances; ++i) {
    const Vector p = random_interior_simplex(n2(rng), rng);
    const MajorizationReport r = check_majorization(p);
    if (r.holds) ++rep.majorization_pass;
    if (r.min_margin < rep.majorization_min_margin) {
      rep.majorization_min_margin = r.min_margin;
      rep.majorization_worst = p;
    }
  }
  return rep;
}

}  // namespace mep

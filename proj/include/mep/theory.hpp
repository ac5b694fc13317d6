#pragma once

// Proposal-distribution construction over a finite simplex and numerical
// checkers for the two entropy results it rests on:
//   * sum p(1-p) R  <  sum p ln(1/p) R          (surrogate lower bound)
//   * H(q) >= H(p) for q = p(1-p)/Z              (entropy increase)
// plus the majorization of q by p that underlies the second one.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mep/common.hpp"

namespace mep {

// Throws Error unless every p_i lies strictly in (0, 1) and the sum is 1
// within 1e-9.
void validate_interior_simplex(std::span<const double> p);

// Unnormalized complement 1 - p_i.
Vector complementary_density(std::span<const double> p);

struct Proposal {
  Vector q;
  double normalization = 0.0;  // Z = sum p(1-p)
};
Proposal proposal_distribution(std::span<const double> p);

// Shannon entropy in nats with 0 ln 0 = 0.
double shannon_entropy(std::span<const double> p);

struct EntropyReport {
  double entropy_p = 0.0;
  double entropy_q = 0.0;
  double delta = 0.0;  // entropy_q - entropy_p
};
EntropyReport check_entropy_increase(std::span<const double> p);

struct LowerBoundReport {
  double eta_h = 0.0;  // sum p ln(1/p) R
  double eta_l = 0.0;  // sum p (1-p) R  (= Z E_q[R])
  bool holds = false;
};
// Returns must be non-negative.
LowerBoundReport check_lower_bound(std::span<const double> p, std::span<const double> returns);

struct MajorizationReport {
  // min over k of (sum of top-k p) - (sum of top-k q); >= 0 means p majorizes q.
  double min_margin = 0.0;
  std::size_t worst_cutoff = 0;
  bool holds = false;
};
MajorizationReport check_majorization(std::span<const double> p, double slack = 1e-12);

// Flat Dirichlet draw with every entry strictly inside (0, 1).
Vector random_interior_simplex(std::size_t n, Rng& rng);

// Randomized sweep used by the verify command and the acceptance suite.
struct TheorySuiteReport {
  std::size_t instances = 0;

  std::size_t entropy_pass = 0;
  double entropy_min_delta = 0.0;
  Vector entropy_worst;
  std::size_t uniform_equality_pass = 0;  // |delta| < 1e-9 on uniform inputs
  std::size_t uniform_cases = 0;
  std::size_t nonuniform_strict = 0;      // delta > 1e-9 on random inputs

  std::size_t bound_pass = 0;
  double bound_min_margin = 0.0;  // min eta_h - eta_l
  Vector bound_worst_p;
  Vector bound_worst_r;

  std::size_t majorization_instances = 0;
  std::size_t majorization_pass = 0;
  double majorization_min_margin = 0.0;
  Vector majorization_worst;

  bool all_pass() const;
};

struct TheorySuiteOptions {
  std::size_t instances = 10000;
  std::size_t majorization_instances = 1000;
  std::uint64_t seed = 0;
  std::size_t entropy_max_n = 50;
  std::size_t bound_max_n = 20;
};

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& options);

}  // namespace mep

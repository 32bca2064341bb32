/*
 * Copyright 2026 The adadp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ADADP_NOISY_ARGMAX_HPP_
#define ADADP_NOISY_ARGMAX_HPP_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <utility>

#include "adadp/mech_core.hpp"
#include "adadp/ptr_engine.hpp"
#include "adadp/random.hpp"

namespace adadp {

namespace internal {

// Log of Pr[L0 - L1 > z] and of its complement, for independent unit-scale
// Laplace L0, L1. The upper tail at |z| is (2 + |z|) exp(-|z|) / 4.
inline std::pair<double, double> log_lap_diff_tail(double z) {
  const double a = std::fabs(z);
  const double log_upper = std::log(2.0 + a) - a - std::log(4.0);
  const double log_lower = std::log1p(-std::exp(log_upper));
  if (z >= 0.0) {
    return {log_upper, log_lower};
  }
  return {log_lower, log_upper};
}

}  // namespace internal

// Pr[L0 - L1 > z] for independent unit-scale Laplace noise.
inline double lap_diff_tail(double z) {
  return std::exp(internal::log_lap_diff_tail(z).first);
}

// Probability that two-class report-noisy-max with Laplace(1/eps) noise
// outputs class 0 on counts (n0, n1).
inline double flip_prob(long n0, long n1, double eps) {
  if (n0 < 0 || n1 < 0) {
    throw std::domain_error("flip_prob: counts must be nonnegative");
  }
  if (!(eps > 0.0)) {
    throw std::domain_error("flip_prob: eps must be positive");
  }
  return lap_diff_tail(eps * static_cast<double>(n1 - n0));
}

// Data-dependent privacy loss of two-class report-noisy-max at counts
// (n0, n1). With delta = 0 this is the worst log-ratio of output
// probabilities against the four add/remove neighbors (counts clamped at
// zero). With delta > 0, histograms whose minority output probability is at
// most delta are treated as exhausted by the delta budget and cost nothing.
inline double data_dep_eps(long n0, long n1, double eps, double delta) {
  if (n0 < 0 || n1 < 0) {
    throw std::domain_error("data_dep_eps: counts must be nonnegative");
  }
  if (!(eps > 0.0)) {
    throw std::domain_error("data_dep_eps: eps must be positive");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::domain_error("data_dep_eps: delta must be in [0, 1)");
  }
  const auto base =
      internal::log_lap_diff_tail(eps * static_cast<double>(n1 - n0));
  if (delta > 0.0) {
    const double log_minority = std::min(base.first, base.second);
    if (log_minority <= std::log(delta)) {
      return 0.0;
    }
  }
  const long cands[4][2] = {{n0 + 1, n1},
                            {std::max(n0 - 1, 0L), n1},
                            {n0, n1 + 1},
                            {n0, std::max(n1 - 1, 0L)}};
  double worst = 0.0;
  for (const auto& c : cands) {
    const auto other =
        internal::log_lap_diff_tail(eps * static_cast<double>(c[1] - c[0]));
    worst = std::max(worst, std::fabs(base.first - other.first));
    worst = std::max(worst, std::fabs(base.second - other.second));
  }
  return worst;
}

// The two-class report-noisy-max mechanism itself.
inline int noisy_vote(long n0, long n1, double eps, RandomSource& rng) {
  if (n0 < 0 || n1 < 0) {
    throw std::domain_error("noisy_vote: counts must be nonnegative");
  }
  if (!(eps > 0.0)) {
    throw std::domain_error("noisy_vote: eps must be positive");
  }
  const double z0 = static_cast<double>(n0) + rng.laplace(1.0 / eps);
  const double z1 = static_cast<double>(n1) + rng.laplace(1.0 / eps);
  return z1 > z0 ? 1 : 0;
}

struct VoteReleaseResult {
  PtrOutcome<int> outcome = PtrOutcome<int>::bottom();
  double eps_private = 0.0;
  PrivacyBudget budget;
};

// Generalized PTR for two-class voting. Privately lower-bounds the count gap
// with t - ln(1/delta)/eps_test + Lap(1/eps_test), then upper-bounds the
// data-dependent loss by scanning every integer gap at least that large.
// Counts (g + 1, 1) realize the worst loss among histograms with gap g
// because they have the full neighbor set, and once the minority probability
// falls to delta every larger gap costs zero, so the scan terminates. With
// delta = 0 the loss supremum over gaps is exactly eps_noise and no gap
// release is needed. Releases the noisy argmax iff the bound clears the
// proposed threshold. Total budget: (eps_test + eps_threshold, delta).
inline VoteReleaseResult gen_ptr_vote(long n0, long n1, double eps_noise,
                                      double eps_test, double eps_threshold,
                                      double delta, RandomSource& rng) {
  if (n0 < 0 || n1 < 0) {
    throw std::domain_error("gen_ptr_vote: counts must be nonnegative");
  }
  if (!(eps_noise > 0.0) || !(eps_test > 0.0)) {
    throw std::domain_error("gen_ptr_vote: eps must be positive");
  }
  if (eps_threshold < 0.0) {
    throw std::domain_error("gen_ptr_vote: eps_threshold must be >= 0");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::domain_error("gen_ptr_vote: delta must be in [0, 1)");
  }

  VoteReleaseResult result;
  result.budget = PrivacyBudget(eps_test + eps_threshold, delta);
  if (delta == 0.0) {
    result.eps_private = eps_noise;
  } else {
    const long gap = std::labs(n1 - n0);
    const double lower = static_cast<double>(gap) -
                         std::log(1.0 / delta) / eps_test +
                         rng.laplace(1.0 / eps_test);
    long g = 0;
    if (lower > 0.0) {
      g = static_cast<long>(std::ceil(lower));
    }
    double worst = 0.0;
    for (;; ++g) {
      const double v = data_dep_eps(g + 1, 1, eps_noise, delta);
      if (v == 0.0) {
        break;
      }
      worst = std::max(worst, v);
    }
    result.eps_private = worst;
  }

  if (result.eps_private <= eps_threshold) {
    result.outcome =
        PtrOutcome<int>::released(noisy_vote(n0, n1, eps_noise, rng));
  }
  return result;
}

struct ClassicVoteResult {
  int label = 0;
  bool passed = false;
  PrivacyBudget budget;
};

// Classic PTR for two-class voting with proposed bound beta = 0: the argmax
// has local sensitivity zero whenever the gap is at least two, so the
// distance to instability is max(gap - 1, 0). On pass, release the exact
// argmax (ties to class 0); on refusal, output a uniformly random class
// instead of Bottom. Budget: (eps_test, delta).
inline ClassicVoteResult classic_ptr_vote(long n0, long n1, double eps_test,
                                          double delta, RandomSource& rng) {
  if (n0 < 0 || n1 < 0) {
    throw std::domain_error("classic_ptr_vote: counts must be nonnegative");
  }
  if (!(eps_test > 0.0)) {
    throw std::domain_error("classic_ptr_vote: eps_test must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("classic_ptr_vote: delta must be in (0, 1)");
  }
  ClassicVoteResult result;
  result.budget = PrivacyBudget(eps_test, delta);
  const double dist =
      std::max(static_cast<double>(std::labs(n1 - n0)) - 1.0, 0.0);
  const double gate = dist + rng.laplace(1.0 / eps_test);
  if (gate > std::log(1.0 / delta) / eps_test) {
    result.passed = true;
    result.label = n1 > n0 ? 1 : 0;
  } else {
    result.passed = false;
    result.label = static_cast<int>(rng.integer_below(2));
  }
  return result;
}

}  // namespace adadp

#endif  // ADADP_NOISY_ARGMAX_HPP_

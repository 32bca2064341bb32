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
#ifndef ADADP_PATE_PTR_HPP_
#define ADADP_PATE_PTR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adadp/mech_core.hpp"
#include "adadp/ptr_engine.hpp"
#include "adadp/random.hpp"

namespace adadp {

// PATE label release gated by generalized PTR. The teacher ensemble answers
// each student query with a vote histogram; labels come from a noisy argmax,
// the data-dependent Renyi privacy loss of the whole batch is bounded, and a
// smooth-sensitivity Gaussian release turns that bound into a private upper
// bound that the PTR test compares against the proposed eps'.

// Per-query vote counts. counts[j] teachers voted for class j.
struct VoteHistogram {
  std::vector<int> counts;
  int teacher_count = 0;

  explicit VoteHistogram(std::vector<int> c) : counts(std::move(c)) {
    if (counts.size() < 2) {
      throw std::invalid_argument("VoteHistogram: need at least two classes");
    }
    for (int n : counts) {
      if (n < 0) {
        throw std::invalid_argument("VoteHistogram: negative count");
      }
      teacher_count += n;
    }
    if (teacher_count <= 0) {
      throw std::invalid_argument("VoteHistogram: no votes");
    }
  }
};

// All pipeline parameters. sigma1 is the vote noise; eps_hat is the budget
// spent on the private upper-bound test; eps_prime is the proposed budget for
// the labels themselves. The remaining fields are fixed by those three and
// delta: the Renyi order alpha, the two release noise scales, and the
// smooth-sensitivity smoothness beta_ss. Note alpha * beta_ss = 0.2, so the
// validity requirement alpha < 1/(2 beta_ss) always holds.
struct PateConfig {
  double sigma1 = 0.0;
  double eps_hat = 0.0;
  double eps_prime = 0.0;
  double delta = 0.0;

  double alpha = 0.0;
  double sigma_s = 0.0;
  double sigma2 = 0.0;
  double beta_ss = 0.0;
  double delta2 = 0.0;
};

inline PateConfig make_pate_config(double sigma1, double eps_hat,
                                   double eps_prime, double delta) {
  if (!(sigma1 > 0.0)) {
    throw std::invalid_argument("make_pate_config: sigma1 must be positive");
  }
  if (!(eps_hat > 0.0)) {
    throw std::invalid_argument("make_pate_config: eps_hat must be positive");
  }
  if (!(eps_prime >= 0.0)) {
    throw std::invalid_argument("make_pate_config: eps_prime negative");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("make_pate_config: delta must be in (0, 1)");
  }
  PateConfig cfg;
  cfg.sigma1 = sigma1;
  cfg.eps_hat = eps_hat;
  cfg.eps_prime = eps_prime;
  cfg.delta = delta;
  cfg.alpha = 2.0 * std::log(2.0 / delta) / eps_hat + 1.0;
  cfg.sigma_s = std::sqrt((3.0 * cfg.alpha + 2.0) / eps_hat);
  cfg.sigma2 = cfg.sigma_s;
  cfg.beta_ss = 0.2 / cfg.alpha;
  cfg.delta2 = delta / 2.0;
  return cfg;
}

// The experiments fix the release noise sigma_s instead of eps_hat, so invert
// the step-2 identities: (alpha - 1) eps_hat = 2 ln(2/delta) and
// eps_hat sigma_s^2 = 3 alpha + 2 give a quadratic in alpha,
// 3 alpha^2 - alpha - (2 + 2 ln(2/delta) sigma_s^2) = 0.
inline PateConfig pate_config_from_sigma_s(double sigma1, double sigma_s,
                                           double eps_prime, double delta) {
  if (!(sigma_s > 0.0)) {
    throw std::invalid_argument(
        "pate_config_from_sigma_s: sigma_s must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument(
        "pate_config_from_sigma_s: delta must be in (0, 1)");
  }
  const double c = 2.0 * std::log(2.0 / delta) * sigma_s * sigma_s;
  const double alpha = (1.0 + std::sqrt(1.0 + 12.0 * (2.0 + c))) / 6.0;
  const double eps_hat = 2.0 * std::log(2.0 / delta) / (alpha - 1.0);
  return make_pate_config(sigma1, eps_hat, eps_prime, delta);
}

// Noisy argmax over the vote counts, independent N(0, sigma1^2) per class.
// sigma1 = 0 degenerates to the exact plurality winner. Ties go to the lowest
// class index; for sigma1 > 0 that is a measure-zero event.
inline int noisy_label(const VoteHistogram& hist, double sigma1,
                       RandomSource& rng) {
  if (sigma1 < 0.0) {
    throw std::domain_error("noisy_label: sigma1 must be nonnegative");
  }
  int best = 0;
  double best_score = 0.0;
  for (std::size_t j = 0; j < hist.counts.size(); ++j) {
    double score = static_cast<double>(hist.counts[j]);
    if (sigma1 > 0.0) {
      score += rng.gaussian(sigma1);
    }
    if (j == 0 || score > best_score) {
      best = static_cast<int>(j);
      best_score = score;
    }
  }
  return best;
}

// Upper bound on the probability that the noisy label differs from the
// plurality winner: union bound over the pairwise events that class j's
// noisy count beats the winner's. Each pairwise difference is Gaussian with
// variance 2 sigma1^2, so the tail is (1/2) erfc(gap / (2 sigma1)).
inline double qtilde(const VoteHistogram& hist, double sigma1) {
  if (!(sigma1 > 0.0)) {
    throw std::domain_error("qtilde: sigma1 must be positive");
  }
  std::size_t star = 0;
  for (std::size_t j = 1; j < hist.counts.size(); ++j) {
    if (hist.counts[j] > hist.counts[star]) {
      star = j;
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < hist.counts.size(); ++j) {
    if (j == star) {
      continue;
    }
    const double gap = static_cast<double>(hist.counts[star] - hist.counts[j]);
    total += 0.5 * std::erfc(gap / (2.0 * sigma1));
  }
  return std::min(1.0, total);
}

// Data-dependent RDP of one noisy-argmax query at order alpha. When the vote
// histogram has strong consensus the loss is far below the data-independent
// Gaussian value alpha / sigma1^2; that value is also the unconditional cap,
// returned whenever the data-dependent theorem's preconditions fail.
//
// eps2_scale selects the noise scale in the eps2 = mu2 / scale^2 term. Zero
// (the default) uses sigma1, the reading consistent with mu2 being measured
// in sigma1 units. The bound is sometimes quoted with the smooth-sensitivity
// release noise in that slot instead; passing that scale explicitly keeps the
// variant reachable for comparison.
inline double per_query_rdp(const VoteHistogram& hist, double sigma1,
                            double alpha, double eps2_scale = 0.0) {
  if (!(alpha > 1.0)) {
    throw std::domain_error("per_query_rdp: alpha must exceed 1");
  }
  const double cap = alpha / (sigma1 * sigma1);
  const double q = qtilde(hist, sigma1);
  if (q <= 0.0) {
    return 0.0;
  }
  if (q >= 1.0) {
    return cap;
  }
  const double lnq = std::log(q);
  const double mu2 = sigma1 * std::sqrt(-lnq);
  const double mu1 = mu2 + 1.0;
  if (!(alpha <= mu1 && mu2 > 1.0)) {
    return cap;
  }
  const double scale = eps2_scale > 0.0 ? eps2_scale : sigma1;
  const double eps1 = mu1 / (sigma1 * sigma1);
  const double eps2 = mu2 / (scale * scale);
  const double rhs =
      (mu2 - 1.0) * eps2 -
      mu2 * (std::log(mu1 / (mu1 - 1.0)) + std::log(mu2 / (mu2 - 1.0)));
  if (lnq > rhs) {
    return cap;
  }
  // Everything below runs in log space; q can be as small as e^-400 here.
  const double w = (mu2 - 1.0) / mu2 * (lnq + eps2);
  if (w >= 0.0) {
    return cap;
  }
  const double ln_a = std::log1p(-q) - std::log1p(-std::exp(w));
  const double ln_b = eps1 - lnq / (mu1 - 1.0);
  const double t1 = std::log1p(-q) + (alpha - 1.0) * ln_a;
  const double t2 = lnq + (alpha - 1.0) * ln_b;
  const double m = std::max(t1, t2);
  const double value =
      (m + std::log(std::exp(t1 - m) + std::exp(t2 - m))) / (alpha - 1.0);
  return std::min(std::max(value, 0.0), cap);
}

// Adaptive composition over the query batch is just the sum at a fixed order.
inline double total_rdp(const std::vector<VoteHistogram>& hists, double sigma1,
                        double alpha) {
  double total = 0.0;
  for (const VoteHistogram& h : hists) {
    total += per_query_rdp(h, sigma1, alpha);
  }
  return total;
}

namespace internal {

// Histograms that differ only by class relabeling have identical RDP, so the
// smooth-sensitivity search runs over sorted-descending count vectors. The
// canonical graph distance never exceeds the raw vote-move distance, which
// makes the result an upper bound on the raw-graph smooth sensitivity and
// keeps it a valid smooth bound (neighbors stay within canonical distance 1).
using CountKey = std::vector<int>;

inline CountKey canonical_counts(const std::vector<int>& counts) {
  CountKey key = counts;
  std::sort(key.begin(), key.end(), std::greater<int>());
  return key;
}

inline std::set<CountKey> vote_move_neighbors(const CountKey& state) {
  std::set<CountKey> out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 0) {
      continue;
    }
    for (std::size_t j = 0; j < state.size(); ++j) {
      if (i == j) {
        continue;
      }
      CountKey moved = state;
      --moved[i];
      ++moved[j];
      out.insert(canonical_counts(moved));
    }
  }
  return out;
}

// Memoized per-state RDP and local sensitivity, valid for one (sigma1, alpha)
// pair. Queries within a batch share the state space, so one workspace per
// smooth_sens_rdp call amortizes the evaluations.
struct SmoothSensWorkspace {
  double sigma1 = 0.0;
  double alpha = 0.0;
  std::map<CountKey, double> rdp;
  std::map<CountKey, double> local;

  double rdp_of(const CountKey& state) {
    auto it = rdp.find(state);
    if (it != rdp.end()) {
      return it->second;
    }
    const double value = per_query_rdp(VoteHistogram(state), sigma1, alpha);
    rdp.emplace(state, value);
    return value;
  }

  double local_of(const CountKey& state) {
    auto it = local.find(state);
    if (it != local.end()) {
      return it->second;
    }
    const double here = rdp_of(state);
    double worst = 0.0;
    for (const CountKey& nb : vote_move_neighbors(state)) {
      worst = std::max(worst, std::fabs(rdp_of(nb) - here));
    }
    local.emplace(state, worst);
    return worst;
  }
};

// Smooth sensitivity of one query's RDP: breadth-first over vote moves,
// scoring each state at depth d by e^{-beta d} times its local sensitivity.
// Because per-query RDP never exceeds cap = alpha / sigma1^2, the search can
// stop once e^{-beta d} * cap falls below the best score so far; deeper
// states cannot win. If the reachable region is flat (all states at the cap)
// the best stays zero and the walk simply exhausts the finite state space.
inline double smooth_sens_query(const VoteHistogram& hist, double beta_ss,
                                SmoothSensWorkspace& ws) {
  const CountKey start = canonical_counts(hist.counts);
  const double cap = ws.alpha / (ws.sigma1 * ws.sigma1);
  double best = ws.local_of(start);
  std::set<CountKey> seen{start};
  std::vector<CountKey> frontier{start};
  int depth = 0;
  while (!frontier.empty()) {
    ++depth;
    const double decay = std::exp(-beta_ss * depth);
    if (decay * cap <= best) {
      break;
    }
    std::vector<CountKey> next;
    for (const CountKey& state : frontier) {
      for (const CountKey& nb : vote_move_neighbors(state)) {
        if (seen.insert(nb).second) {
          best = std::max(best, decay * ws.local_of(nb));
          next.push_back(nb);
        }
      }
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace internal

// Smooth sensitivity of total_rdp. One changed teacher can move one vote in
// every query's histogram at once, so the per-query smooth sensitivities
// compose additively and their sum is the released bound.
inline double smooth_sens_rdp(const std::vector<VoteHistogram>& hists,
                              double sigma1, double alpha, double beta_ss) {
  if (!(beta_ss > 0.0)) {
    throw std::domain_error("smooth_sens_rdp: beta_ss must be positive");
  }
  if (!(sigma1 > 0.0)) {
    throw std::domain_error("smooth_sens_rdp: sigma1 must be positive");
  }
  if (!(alpha > 1.0)) {
    throw std::domain_error("smooth_sens_rdp: alpha must exceed 1");
  }
  internal::SmoothSensWorkspace ws;
  ws.sigma1 = sigma1;
  ws.alpha = alpha;
  double total = 0.0;
  for (const VoteHistogram& h : hists) {
    total += internal::smooth_sens_query(h, beta_ss, ws);
  }
  return total;
}

// Private upper bound on the data-dependent RDP. mu releases the log of the
// smooth sensitivity, shifted so e^mu covers the true value with probability
// 1 - delta2/2; rdp_upper then adds noise scaled by the true smooth
// sensitivity plus a shift scaled by the released e^mu.
struct GnssRelease {
  double mu = 0.0;
  double rdp_upper = 0.0;
};

inline GnssRelease gnss_release(double rdp_value, double ss_value,
                                const PateConfig& cfg, RandomSource& rng) {
  if (!(ss_value > 0.0)) {
    throw std::domain_error("gnss_release: smooth sensitivity must be positive");
  }
  const double shift = std::sqrt(2.0 * std::log(2.0 / cfg.delta2));
  GnssRelease out;
  out.mu = std::log(ss_value) + cfg.beta_ss * rng.gaussian(cfg.sigma2) +
           shift * cfg.sigma2 * cfg.beta_ss;
  out.rdp_upper = rdp_value + ss_value * rng.gaussian(cfg.sigma_s) +
                  cfg.sigma_s * shift * std::exp(out.mu);
  return out;
}

// Declared privacy of the pair (mu, rdp_upper): (alpha, (3 alpha + 2) /
// (2 sigma_s^2))-RDP for orders below 1 / (2 beta_ss). At the config's own
// alpha this evaluates to eps_hat / 2.
inline RdpCurve gnss_rdp_curve(const PateConfig& cfg) {
  RdpCurve curve;
  const double s2 = cfg.sigma_s * cfg.sigma_s;
  curve.eval = [s2](double a) { return (3.0 * a + 2.0) / (2.0 * s2); };
  curve.alpha_max = 1.0 / (2.0 * cfg.beta_ss);
  return curve;
}

struct PatePtrResult {
  PtrOutcome<std::vector<int>> outcome = PtrOutcome<std::vector<int>>::bottom();
  double rdp_total = 0.0;
  double smooth_sens = 0.0;
  double mu = 0.0;
  double rdp_upper = 0.0;
  double eps_sigma1 = 0.0;
  PrivacyBudget budget;
};

// End-to-end pipeline: label every query, bound the batch's data-dependent
// RDP, release the bound privately, convert to DP at delta / 2, and release
// the labels only if the proposed eps' covers the converted bound. The
// labels themselves are post-processing of the noisy argmaxes; a student
// model trained on them inherits the same guarantee. Total declared budget
// (eps' + eps_hat, delta).
inline PatePtrResult pate_ptr_run(const std::vector<VoteHistogram>& hists,
                                  const PateConfig& cfg, RandomSource& rng) {
  PatePtrResult result;
  std::vector<int> labels;
  labels.reserve(hists.size());
  for (const VoteHistogram& h : hists) {
    labels.push_back(noisy_label(h, cfg.sigma1, rng));
  }
  result.rdp_total = total_rdp(hists, cfg.sigma1, cfg.alpha);
  result.smooth_sens = smooth_sens_rdp(hists, cfg.sigma1, cfg.alpha,
                                       cfg.beta_ss);
  // A perfectly flat RDP landscape gives smooth sensitivity zero, which the
  // log release cannot take. Floor it at a denormal-adjacent positive value;
  // the release then degenerates to the correct noiseless bound.
  const double ss = std::max(result.smooth_sens, 1e-300);
  const GnssRelease rel = gnss_release(result.rdp_total, ss, cfg, rng);
  result.mu = rel.mu;
  result.rdp_upper = rel.rdp_upper;
  RdpCurve released;
  released.eval = [v = rel.rdp_upper](double) { return v; };
  result.eps_sigma1 = rdp_to_dp(released, cfg.alpha, cfg.delta2).epsilon;
  if (cfg.eps_prime >= result.eps_sigma1) {
    result.outcome = PtrOutcome<std::vector<int>>::released(std::move(labels));
  }
  result.budget = PrivacyBudget(cfg.eps_prime + cfg.eps_hat, cfg.delta);
  return result;
}

// Data-independent comparison point: the Gaussian RDP of the whole batch,
// T * alpha / sigma1^2, converted to DP at delta / 2.
inline double pate_gaussian_baseline(int num_queries, const PateConfig& cfg) {
  if (num_queries < 0) {
    throw std::invalid_argument("pate_gaussian_baseline: negative count");
  }
  RdpCurve curve;
  const double per = cfg.alpha / (cfg.sigma1 * cfg.sigma1);
  curve.eval = [per, num_queries](double) { return num_queries * per; };
  return rdp_to_dp(curve, cfg.alpha, cfg.delta2).epsilon;
}

enum class ConsensusRegime { kHigh, kLow };

// Synthetic teacher votes. The majority count m is uniform above the 0.375 K
// consensus threshold (high regime) or between K / C and the threshold (low
// regime); the remaining K - m votes spread over the other classes by a
// symmetric Dirichlet-multinomial draw, rejecting splits whose largest loser
// beats m. After 200 rejected draws the split falls back to even, which at
// C >= 3 always respects the constraint.
inline std::vector<VoteHistogram> simulate_consensus(int teachers, int classes,
                                                     int queries,
                                                     ConsensusRegime regime,
                                                     RandomSource& rng) {
  if (classes < 3) {
    throw std::invalid_argument(
        "simulate_consensus: need at least three classes");
  }
  if (teachers < classes) {
    throw std::invalid_argument("simulate_consensus: fewer votes than classes");
  }
  if (queries < 0) {
    throw std::invalid_argument("simulate_consensus: negative query count");
  }
  const int threshold = static_cast<int>(std::ceil(0.375 * teachers));
  int lo = 0;
  int hi = 0;
  if (regime == ConsensusRegime::kHigh) {
    lo = threshold + 1;
    hi = teachers;
  } else {
    lo = static_cast<int>(
        std::ceil(static_cast<double>(teachers) / classes));
    hi = threshold - 1;
  }
  if (lo > hi) {
    throw std::invalid_argument("simulate_consensus: empty majority range");
  }

  std::vector<VoteHistogram> out;
  out.reserve(static_cast<std::size_t>(queries));
  const int losers = classes - 1;
  for (int t = 0; t < queries; ++t) {
    const int m =
        lo + static_cast<int>(rng.integer_below(
                 static_cast<std::uint64_t>(hi - lo + 1)));
    const int rest = teachers - m;
    std::vector<int> split;
    bool accepted = false;
    for (int attempt = 0; attempt < 200 && !accepted; ++attempt) {
      std::vector<double> weights(losers);
      double sum = 0.0;
      for (double& w : weights) {
        w = -std::log(rng.uniform());
        sum += w;
      }
      std::vector<int> counts(losers, 0);
      for (int v = 0; v < rest; ++v) {
        const double u = rng.uniform();
        double acc = 0.0;
        bool placed = false;
        for (int j = 0; j < losers; ++j) {
          acc += weights[j] / sum;
          if (u <= acc) {
            ++counts[j];
            placed = true;
            break;
          }
        }
        if (!placed) {
          ++counts[losers - 1];
        }
      }
      if (*std::max_element(counts.begin(), counts.end()) <= m) {
        split = std::move(counts);
        accepted = true;
      }
    }
    if (!accepted) {
      split.assign(losers, rest / losers);
      for (int j = 0; j < rest % losers; ++j) {
        ++split[j];
      }
    }
    std::vector<int> counts;
    counts.reserve(static_cast<std::size_t>(classes));
    counts.push_back(m);
    counts.insert(counts.end(), split.begin(), split.end());
    out.emplace_back(std::move(counts));
  }
  return out;
}

}  // namespace adadp

#endif  // ADADP_PATE_PTR_HPP_

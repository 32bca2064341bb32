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
#ifndef ADADP_MECH_CORE_HPP_
#define ADADP_MECH_CORE_HPP_

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adadp/random.hpp"

namespace adadp {

// All epsilons are in nats; all logs are natural.

enum class NoiseKind { kLaplace, kGaussian };

// Raised when no parameter value can meet a requested privacy target.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

// An (epsilon, delta) differential-privacy guarantee.
struct PrivacyBudget {
  double epsilon = 0.0;
  double delta = 0.0;

  PrivacyBudget() = default;
  PrivacyBudget(double eps, double del) : epsilon(eps), delta(del) {
    if (!(epsilon >= 0.0)) {
      throw std::domain_error("PrivacyBudget: epsilon must be >= 0");
    }
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw std::domain_error("PrivacyBudget: delta must be in [0, 1)");
    }
  }
};

// A Renyi-DP curve: an evaluable map alpha -> eps(alpha) for alpha > 1, with
// an optional validity ceiling (some guarantees hold only for alpha below a
// mechanism-specific bound).
struct RdpCurve {
  std::function<double(double)> eval;
  std::optional<double> alpha_max;

  double at(double alpha) const {
    if (!(alpha > 1.0)) {
      throw std::domain_error("RdpCurve: alpha must exceed 1");
    }
    if (alpha_max.has_value() && alpha > *alpha_max) {
      throw std::domain_error("RdpCurve: alpha above the curve's ceiling");
    }
    return eval(alpha);
  }
};

inline double sample_noise(NoiseKind kind, double scale, RandomSource& rng) {
  if (!(scale > 0.0)) {
    throw std::domain_error("sample_noise: scale must be positive");
  }
  return kind == NoiseKind::kLaplace ? rng.laplace(scale)
                                     : rng.gaussian(scale);
}

// Upper tail probability Pr[noise > t]. The Laplace value is exact. The
// Gaussian value is the sub-Gaussian bound exp(-t^2 / (2 sigma^2)), which is
// what the shifted-release coverage arguments in this library are calibrated
// to: t = sigma * sqrt(2 ln(1/delta)) gives exactly delta.
inline double tail_bound(NoiseKind kind, double scale, double t) {
  if (!(scale > 0.0)) {
    throw std::domain_error("tail_bound: scale must be positive");
  }
  if (t < 0.0) {
    throw std::domain_error("tail_bound: t must be nonnegative");
  }
  if (kind == NoiseKind::kLaplace) {
    return 0.5 * std::exp(-t / scale);
  }
  return std::exp(-t * t / (2.0 * scale * scale));
}

// Exact Gaussian upper tail, for diagnostics only; the library's coverage
// accounting uses tail_bound above.
inline double tail_bound_exact(NoiseKind kind, double scale, double t) {
  if (!(scale > 0.0)) {
    throw std::domain_error("tail_bound_exact: scale must be positive");
  }
  if (t < 0.0) {
    throw std::domain_error("tail_bound_exact: t must be nonnegative");
  }
  if (kind == NoiseKind::kLaplace) {
    return 0.5 * std::exp(-t / scale);
  }
  return 0.5 * std::erfc(t / (scale * std::sqrt(2.0)));
}

// Data-dependent privacy loss of the Laplace mechanism with noise scale phi:
// the loss at a concrete input equals local_sensitivity / phi.
inline double laplace_data_dep_dp(double local_sensitivity, double phi) {
  if (!(phi > 0.0)) {
    throw std::domain_error("laplace_data_dep_dp: phi must be positive");
  }
  if (local_sensitivity < 0.0) {
    throw std::domain_error("laplace_data_dep_dp: negative sensitivity");
  }
  return local_sensitivity / phi;
}

// Converts an RDP guarantee at a single order to (eps, delta)-DP:
// (eps(alpha) + ln(1/delta)/(alpha - 1), delta).
inline PrivacyBudget rdp_to_dp(const RdpCurve& curve, double alpha,
                               double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("rdp_to_dp: delta must be in (0, 1)");
  }
  const double eps_rdp = curve.at(alpha);
  return PrivacyBudget(eps_rdp + std::log(1.0 / delta) / (alpha - 1.0), delta);
}

// Adaptive composition of RDP guarantees: pointwise sum of the curves. The
// composed curve is valid up to the smallest input ceiling.
inline RdpCurve compose_rdp(const std::vector<RdpCurve>& curves) {
  if (curves.empty()) {
    throw std::domain_error("compose_rdp: empty curve list");
  }
  std::optional<double> ceiling;
  for (const RdpCurve& c : curves) {
    if (c.alpha_max.has_value()) {
      ceiling = ceiling.has_value() ? std::min(*ceiling, *c.alpha_max)
                                    : *c.alpha_max;
    }
  }
  RdpCurve out;
  out.alpha_max = ceiling;
  out.eval = [curves](double alpha) {
    double total = 0.0;
    for (const RdpCurve& c : curves) {
      total += c.at(alpha);
    }
    return total;
  };
  return out;
}

// Basic composition of (eps, delta) budgets: componentwise sums.
inline PrivacyBudget compose_dp(const std::vector<PrivacyBudget>& budgets) {
  if (budgets.empty()) {
    throw std::domain_error("compose_dp: empty budget list");
  }
  double eps = 0.0;
  double delta = 0.0;
  for (const PrivacyBudget& b : budgets) {
    eps += b.epsilon;
    delta += b.delta;
  }
  if (delta >= 1.0) {
    throw std::domain_error("compose_dp: composed delta reaches 1");
  }
  return PrivacyBudget(eps, delta);
}

}  // namespace adadp

#endif  // ADADP_MECH_CORE_HPP_

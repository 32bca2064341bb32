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
#ifndef ADADP_PTR_ENGINE_HPP_
#define ADADP_PTR_ENGINE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "adadp/mech_core.hpp"
#include "adadp/random.hpp"

namespace adadp {

// Result of a propose-test-release run: either the refusal symbol (Bottom)
// or a released value.
template <typename T>
class PtrOutcome {
 public:
  static PtrOutcome bottom() { return PtrOutcome(std::nullopt); }
  static PtrOutcome released(T v) { return PtrOutcome(std::move(v)); }

  bool is_bottom() const { return !value_.has_value(); }
  bool is_released() const { return value_.has_value(); }

  const T& value() const {
    if (!value_.has_value()) {
      throw std::logic_error("PtrOutcome: no value in Bottom");
    }
    return *value_;
  }

 private:
  explicit PtrOutcome(std::optional<T> v) : value_(std::move(v)) {}
  std::optional<T> value_;
};

// A differentially private test. `run` returns 1 (pass) or 0 (refuse). The
// declared budget covers the test itself; false_pass_rate is the declared
// probability that the test passes on an input it should refuse.
template <typename Dataset>
struct DpTest {
  std::function<bool(const Dataset&, RandomSource&)> run;
  PrivacyBudget budget;
  double false_pass_rate = 0.0;
};

// A gated mechanism: the mechanism's own budget plus the test guarding it.
template <typename Dataset>
struct GenPtrSpec {
  PrivacyBudget mech_budget;
  DpTest<Dataset> test;
};

// Classic propose-test-release. dist_to_unstable(X) is the caller's exact
// distance from X to the nearest dataset whose local sensitivity exceeds the
// proposed bound beta. Refuses when the noised distance fails to clear
// ln(1/delta)/eps; otherwise releases query(X) with Laplace(beta/eps) noise.
// Total guarantee: (2 eps, delta).
template <typename Dataset, typename Query, typename Dist>
PtrOutcome<double> classic_ptr(const Dataset& data, double beta, double eps,
                               double delta, Query query,
                               Dist dist_to_unstable, RandomSource& rng) {
  if (!(beta > 0.0)) {
    throw std::domain_error("classic_ptr: beta must be positive");
  }
  if (!(eps > 0.0)) {
    throw std::domain_error("classic_ptr: eps must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("classic_ptr: delta must be in (0, 1)");
  }
  const double gate =
      static_cast<double>(dist_to_unstable(data)) + rng.laplace(1.0 / eps);
  if (gate <= std::log(1.0 / delta) / eps) {
    return PtrOutcome<double>::bottom();
  }
  return PtrOutcome<double>::released(query(data) + rng.laplace(beta / eps));
}

inline PrivacyBudget classic_ptr_budget(double eps, double delta) {
  return PrivacyBudget(2.0 * eps, delta);
}

// Generalized propose-test-release: run the test, and only on pass run the
// gated mechanism. The mechanism is never evaluated on a refused input.
template <typename Dataset, typename Mechanism>
auto run_generalized_ptr(const Dataset& data, const GenPtrSpec<Dataset>& spec,
                         Mechanism mechanism, RandomSource& rng)
    -> PtrOutcome<decltype(mechanism(data, rng))> {
  using Value = decltype(mechanism(data, rng));
  if (!spec.test.run(data, rng)) {
    return PtrOutcome<Value>::bottom();
  }
  return PtrOutcome<Value>::released(mechanism(data, rng));
}

// Total budget of a generalized PTR run: (eps + eps_hat,
// delta + delta_hat + delta').
template <typename Dataset>
PrivacyBudget gen_ptr_budget(const GenPtrSpec<Dataset>& spec) {
  return compose_dp({spec.mech_budget, spec.test.budget,
                     PrivacyBudget(0.0, spec.test.false_pass_rate)});
}

// A private release of an upper bound on the data-dependent privacy loss.
// coverage_delta bounds Pr[released value <= true loss].
template <typename Dataset>
struct UpperBoundRelease {
  std::function<double(const Dataset&, RandomSource&)> release;
  PrivacyBudget budget;
  double coverage_delta = 0.0;
};

// Builds the PTR test "pass iff the privately released upper bound is below
// the proposed epsilon". Its false-pass rate is the release's coverage
// failure probability: when the true loss exceeds the threshold, passing
// requires the release to undershoot the true loss.
template <typename Dataset>
DpTest<Dataset> upper_bound_test(UpperBoundRelease<Dataset> release,
                                 double threshold_eps) {
  DpTest<Dataset> test;
  test.budget = release.budget;
  test.false_pass_rate = release.coverage_delta;
  test.run = [release = std::move(release), threshold_eps](
                 const Dataset& data, RandomSource& rng) {
    return release.release(data, rng) < threshold_eps;
  };
  return test;
}

// Budget of the random-stopping hyperparameter tuner when each trial is
// (eps_star, delta_star)-DP and the stopping cutoff is T:
// (3 eps_star + 3 sqrt(2 delta_star), sqrt(2 delta_star) T + delta2).
inline PrivacyBudget tuner_budget(double eps_star, double delta_star, int T,
                                  double delta2) {
  if (T < 1) {
    throw std::domain_error("tuner_budget: T must be at least 1");
  }
  if (delta_star < 0.0 || delta2 < 0.0) {
    throw std::domain_error("tuner_budget: negative delta");
  }
  const double root = std::sqrt(2.0 * delta_star);
  return PrivacyBudget(3.0 * eps_star + 3.0 * root, root * T + delta2);
}

// Expected quantile of the best of T_hat = min(T, Geometric(tau)) uniform
// scores: E[1 - 1/(T_hat + 1)], evaluated by the exact finite sum.
inline double expected_quantile(double tau, int T) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::domain_error("expected_quantile: tau must be in (0, 1]");
  }
  if (T < 1) {
    throw std::domain_error("expected_quantile: T must be at least 1");
  }
  double total = 0.0;
  double survive = 1.0;  // (1 - tau)^(g - 1)
  for (int g = 1; g <= T - 1; ++g) {
    total += tau * survive * (1.0 - 1.0 / (g + 1.0));
    survive *= 1.0 - tau;
  }
  total += survive * (1.0 - 1.0 / (T + 1.0));
  return total;
}

template <typename Value, typename Phi>
struct SelectionResult {
  PtrOutcome<Value> best = PtrOutcome<Value>::bottom();
  std::optional<Phi> best_phi;
  int trials = 0;
  PrivacyBudget per_run_budget;
};

// Random-stopping hyperparameter selection. Draws the trial count
// T_hat = min(T, G) with G geometric on {1, 2, ...} (Pr[G = g] =
// tau (1 - tau)^(g - 1)), runs the runner on T_hat independent uniform picks
// from phis (with replacement), and returns the highest-scoring released
// result. Ties keep the earliest trial. All-refused runs return Bottom.
template <typename Phi, typename Runner, typename Scorer>
auto select_hyperparameters(const std::vector<Phi>& phis,
                            const PrivacyBudget& per_run_budget, int cutoff,
                            double tau, Scorer score, Runner runner,
                            RandomSource& rng)
    -> SelectionResult<
        std::decay_t<decltype(runner(phis.front(), rng).value())>, Phi> {
  using Value = std::decay_t<decltype(runner(phis.front(), rng).value())>;
  if (phis.empty()) {
    throw std::domain_error("select_hyperparameters: empty candidate list");
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::domain_error("select_hyperparameters: tau must be in (0, 1]");
  }
  if (cutoff < 1) {
    throw std::domain_error("select_hyperparameters: cutoff must be >= 1");
  }
  int g = cutoff;
  if (tau < 1.0) {
    const double u = rng.uniform();
    const double draw = std::floor(std::log(u) / std::log(1.0 - tau));
    // The geometric draw can exceed any int; only its min with the cutoff
    // matters.
    if (draw < static_cast<double>(cutoff)) {
      g = 1 + static_cast<int>(draw);
      if (g < 1) g = 1;
    }
  } else {
    g = 1;
  }
  const int t_hat = std::min(cutoff, g);

  SelectionResult<Value, Phi> result;
  result.trials = t_hat;
  result.per_run_budget = per_run_budget;
  bool have_best = false;
  double best_score = 0.0;
  for (int trial = 0; trial < t_hat; ++trial) {
    const std::size_t pick =
        static_cast<std::size_t>(rng.integer_below(phis.size()));
    RandomSource trial_rng(rng.next_u64());
    PtrOutcome<Value> out = runner(phis[pick], trial_rng);
    if (out.is_bottom()) {
      continue;
    }
    const double s = score(out.value());
    if (!have_best || s > best_score) {
      have_best = true;
      best_score = s;
      result.best = out;
      result.best_phi = phis[pick];
    }
  }
  return result;
}

}  // namespace adadp

#endif  // ADADP_PTR_ENGINE_HPP_

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
#ifndef ADADP_OPS_LINREG_HPP_
#define ADADP_OPS_LINREG_HPP_

#include <cmath>
#include <stdexcept>

#include "Eigen/Cholesky"
#include "Eigen/Core"
#include "Eigen/Eigenvalues"
#include "adadp/mech_core.hpp"
#include "adadp/random.hpp"

namespace adadp {

// Private linear regression by one-posterior sampling (OPS) with
// propose-test-release. Rows of X must satisfy ||x|| <= x_bound <= 1 and
// targets |y| <= y_bound; callers normalize their data first.

inline void check_linreg_bounds(double x_bound, double y_bound) {
  if (!(x_bound > 0.0 && x_bound <= 1.0)) {
    throw std::domain_error("ops_linreg: x_bound must be in (0, 1]");
  }
  if (!(y_bound > 0.0)) {
    throw std::domain_error("ops_linreg: y_bound must be positive");
  }
}

// Smallest eigenvalue of X^T X.
inline double lambda_min_exact(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("lambda_min_exact: eigensolver failed");
  }
  return solver.eigenvalues().minCoeff();
}

// Ridge solution (X^T X + lambda I)^{-1} X^T y.
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::domain_error("ridge_solve: lambda must be positive");
  }
  if (x.rows() != y.size()) {
    throw std::invalid_argument("ridge_solve: row count mismatch");
  }
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += lambda;
  return Eigen::LLT<Eigen::MatrixXd>(a).solve(x.transpose() * y);
}

// Data-dependent privacy loss of posterior sampling with parameters
// (gamma, lambda) at a dataset whose local Lipschitz constant is `lipschitz`
// and whose shifted curvature is lambda_star = lambda + lambda_min(X^T X).
inline double per_instance_eps(double gamma, double lipschitz,
                               double lambda_star, double x_bound,
                               double delta) {
  if (!(gamma >= 0.0)) {
    throw std::domain_error("per_instance_eps: gamma must be >= 0");
  }
  if (!(lipschitz >= 0.0)) {
    throw std::domain_error("per_instance_eps: lipschitz must be >= 0");
  }
  if (!(lambda_star > 0.0)) {
    throw std::domain_error("per_instance_eps: lambda_star must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("per_instance_eps: delta must be in (0, 1)");
  }
  // gamma = 0 means no posterior term at all, even when the Lipschitz
  // release has overflowed to infinity.
  const double gl2 = gamma == 0.0 ? 0.0 : gamma * lipschitz * lipschitz;
  const double log_term = std::log(2.0 / delta);
  return std::sqrt(gl2 * log_term / lambda_star) +
         gl2 / (2.0 * (lambda_star + x_bound * x_bound)) +
         (1.0 + log_term * x_bound * x_bound) / (2.0 * lambda_star);
}

// Lower bound on lambda_min(X^T X), private at (eps/4, delta/3): Gaussian
// noise scaled for sensitivity x_bound^2 <= 1, shifted down so the release
// exceeds the true value with probability at most delta/2.
inline double release_lambda_min(double lambda_min, double eps, double delta,
                                 RandomSource& rng) {
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("release_lambda_min: bad budget");
  }
  const double scale = 4.0 / eps;
  const double sigma = scale * std::sqrt(std::log(6.0 / delta));
  const double shift =
      scale * std::sqrt(2.0 * std::log(6.0 / delta) * std::log(2.0 / delta));
  const double noised = lambda_min + sigma * rng.gaussian(1.0) - shift;
  return noised > 0.0 ? noised : 0.0;
}

// Upper bound on the local Lipschitz constant
// L = x_bound (y_bound + x_bound ||theta*||), private at (eps/4, delta/3).
// Its log has sensitivity log(1 + x_bound^2 / (lambda + lambda_min)), which
// stays valid with the private lower bound in the denominator; the noise is
// added on the log scale and shifted up so the release undershoots the true
// value with probability at most delta/2.
inline double release_lipschitz(double theta_norm, double lambda,
                                double lambda_min_private, double x_bound,
                                double y_bound, double eps, double delta,
                                RandomSource& rng) {
  check_linreg_bounds(x_bound, y_bound);
  if (!(lambda > 0.0)) {
    throw std::domain_error("release_lipschitz: lambda must be positive");
  }
  if (!(lambda_min_private >= 0.0)) {
    throw std::domain_error("release_lipschitz: negative lambda_min");
  }
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("release_lipschitz: bad budget");
  }
  const double sens =
      std::log(1.0 + x_bound * x_bound / (lambda + lambda_min_private));
  const double scale = 4.0 / eps;
  const double sigma = sens * scale * std::sqrt(std::log(6.0 / delta));
  const double shift = sens * scale *
                       std::sqrt(2.0 * std::log(6.0 / delta) *
                                 std::log(2.0 / delta));
  const double log_release = std::log(y_bound + x_bound * theta_norm) +
                             sigma * rng.gaussian(1.0) + shift;
  return x_bound * std::exp(log_release);
}

// Largest gamma whose data-dependent loss meets eps_target, found by
// bisection. The loss at gamma -> 0 is the gamma-free floor
// (1 + log(2/delta) x_bound^2) / (2 lambda_star); targets below it are
// infeasible.
inline double calibrate_gamma(double eps_target, double delta,
                              double lipschitz, double lambda_star,
                              double x_bound) {
  if (!(eps_target > 0.0)) {
    throw std::domain_error("calibrate_gamma: eps_target must be positive");
  }
  const double floor = per_instance_eps(0.0, lipschitz, lambda_star, x_bound,
                                        delta);
  if (floor >= eps_target) {
    throw InfeasibleError("calibrate_gamma: target below the gamma-free floor");
  }
  if (!std::isfinite(lipschitz)) {
    throw InfeasibleError("calibrate_gamma: Lipschitz release overflowed");
  }
  if (!(lipschitz > 0.0)) {
    throw std::domain_error("calibrate_gamma: lipschitz must be positive");
  }
  auto loss = [&](double gamma) {
    return per_instance_eps(gamma, lipschitz, lambda_star, x_bound, delta);
  };
  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (loss(hi) < eps_target) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) {
      throw std::runtime_error("calibrate_gamma: bracket failed");
    }
  }
  while ((hi - lo) > 1e-9 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (loss(mid) < eps_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// One sample from the posterior p(theta) proportional to
// exp(-gamma (0.5 ||y - X theta||^2 + 0.5 lambda ||theta||^2)): a Gaussian
// with mean ridge_solve(X, y, lambda) and precision gamma (X^T X + lambda I).
inline Eigen::VectorXd sample_posterior(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        double lambda, double gamma,
                                        RandomSource& rng) {
  if (!(gamma > 0.0)) {
    throw std::domain_error("sample_posterior: gamma must be positive");
  }
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  const Eigen::VectorXd mean = llt.solve(x.transpose() * y);
  Eigen::VectorXd z(x.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = rng.gaussian(1.0);
  }
  const Eigen::VectorXd spread =
      llt.matrixU().solve(z) / std::sqrt(gamma);
  return mean + spread;
}

// Non-adaptive baseline: ridge solution plus Gaussian noise calibrated to
// the global L2 sensitivity 2 x_bound (y_bound + x_bound^2 y_bound / lambda)
// / lambda.
inline Eigen::VectorXd output_perturbation_baseline(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
    double eps, double delta, double x_bound, double y_bound,
    RandomSource& rng) {
  check_linreg_bounds(x_bound, y_bound);
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("output_perturbation_baseline: bad budget");
  }
  const double theta_cap = x_bound * y_bound / lambda;
  const double sens =
      2.0 * x_bound * (y_bound + x_bound * theta_cap) / lambda;
  const double sigma = sens * std::sqrt(2.0 * std::log(1.25 / delta)) / eps;
  Eigen::VectorXd theta = ridge_solve(x, y, lambda);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    theta(i) += rng.gaussian(sigma);
  }
  return theta;
}

struct OpsPtrResult {
  Eigen::VectorXd theta;
  double gamma = 0.0;
  double lambda_min_private = 0.0;
  double lipschitz_private = 0.0;
  double eps_sanitized = 0.0;
  PrivacyBudget budget;
};

// Full OPS pipeline at a fixed lambda, the "no Bottom" variant: release
// lambda_min and the Lipschitz constant at (eps/4, delta/3) each, calibrate
// gamma against the sanitized quantities so the posterior sample costs
// (eps/2, delta/3), and always output the sample. The declared total is
// (eps, 2 delta): three delta/3 terms plus delta/2 coverage failure for each
// of the two shifted releases. Raises InfeasibleError when no gamma > 0
// meets the target at this lambda.
inline OpsPtrResult ops_ptr_run(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y, double lambda,
                                double eps, double delta, double x_bound,
                                double y_bound, RandomSource& rng) {
  check_linreg_bounds(x_bound, y_bound);
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 0.5)) {
    throw std::domain_error("ops_ptr_run: bad budget");
  }
  OpsPtrResult result;
  result.lambda_min_private =
      release_lambda_min(lambda_min_exact(x), eps, delta, rng);
  const Eigen::VectorXd ridge = ridge_solve(x, y, lambda);
  result.lipschitz_private =
      release_lipschitz(ridge.norm(), lambda, result.lambda_min_private,
                        x_bound, y_bound, eps, delta, rng);
  const double lambda_star = lambda + result.lambda_min_private;
  result.gamma = calibrate_gamma(eps / 2.0, delta / 3.0,
                                 result.lipschitz_private, lambda_star,
                                 x_bound);
  result.eps_sanitized =
      per_instance_eps(result.gamma, result.lipschitz_private, lambda_star,
                       x_bound, delta / 3.0);
  result.theta = sample_posterior(x, y, lambda, result.gamma, rng);
  result.budget = PrivacyBudget(eps, 2.0 * delta);
  return result;
}

}  // namespace adadp

#endif  // ADADP_OPS_LINREG_HPP_

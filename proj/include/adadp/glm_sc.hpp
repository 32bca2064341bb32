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
#ifndef ADADP_GLM_SC_HPP_
#define ADADP_GLM_SC_HPP_

#include <cmath>
#include <stdexcept>

#include "Eigen/Cholesky"
#include "Eigen/Core"
#include "adadp/mech_core.hpp"
#include "adadp/random.hpp"

namespace adadp {

// Private GLM output perturbation for losses that are Lipschitz, smooth, and
// generalized self-concordant (logistic regression being the shipped case).
// Rows must satisfy ||x|| <= r_bound and labels live in {-1, +1}.

// Margin-form logistic loss l(u) = log(1 + exp(-u)) and its first three
// derivatives, evaluated without overflow on either tail.
struct LogisticDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

inline LogisticDerivs logistic_derivatives(double u) {
  LogisticDerivs out;
  double sig;  // logistic sigmoid of u
  if (u >= 0.0) {
    const double e = std::exp(-u);
    out.value = std::log1p(e);
    sig = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(u);
    out.value = -u + std::log1p(e);
    sig = e / (1.0 + e);
  }
  out.d1 = sig - 1.0;
  out.d2 = sig * (1.0 - sig);
  out.d3 = out.d2 * (1.0 - 2.0 * sig);
  return out;
}

// Loss bounds for the logistic case: |l'| <= 1 and |l''| <= 1/4.
inline constexpr double kLogisticLipschitz = 1.0;
inline constexpr double kLogisticSmoothness = 0.25;

inline void check_glm_labels(const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 1.0 && y(i) != -1.0) {
      throw std::invalid_argument("glm_sc: labels must be +1 or -1");
    }
  }
}

// Hessian of the unregularized objective sum_i l(y_i x_i^T theta).
inline Eigen::MatrixXd logistic_hessian(const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& theta) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double u = y(i) * x.row(i).dot(theta);
    h += logistic_derivatives(u).d2 * x.row(i).transpose() * x.row(i);
  }
  return h;
}

// Newton's method with step halving on
// sum_i l(y_i x_i^T theta) + lambda ||theta||^2 / 2.
inline Eigen::VectorXd fit_regularized(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y,
                                       double lambda) {
  if (!(lambda > 0.0)) {
    throw std::domain_error("fit_regularized: lambda must be positive");
  }
  if (x.rows() != y.size()) {
    throw std::invalid_argument("fit_regularized: row count mismatch");
  }
  check_glm_labels(y);
  const Eigen::Index d = x.cols();
  auto objective = [&](const Eigen::VectorXd& theta) {
    double total = 0.5 * lambda * theta.squaredNorm();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      total += logistic_derivatives(y(i) * x.row(i).dot(theta)).value;
    }
    return total;
  };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  double value = objective(theta);
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd grad = lambda * theta;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    hess.diagonal().array() += lambda;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double u = y(i) * x.row(i).dot(theta);
      const LogisticDerivs l = logistic_derivatives(u);
      grad += l.d1 * y(i) * x.row(i).transpose();
      hess += l.d2 * x.row(i).transpose() * x.row(i);
    }
    if (grad.norm() <= 1e-10) {
      break;
    }
    const Eigen::VectorXd step = Eigen::LLT<Eigen::MatrixXd>(hess).solve(grad);
    double scale = 1.0;
    Eigen::VectorXd next = theta - scale * step;
    double next_value = objective(next);
    int halvings = 0;
    while (next_value > value && halvings < 60) {
      scale *= 0.5;
      next = theta - scale * step;
      next_value = objective(next);
      ++halvings;
    }
    theta = next;
    value = next_value;
  }
  return theta;
}

// Smallest eigenvalue of the unregularized Hessian at theta, by the power
// method on s I - H with s the Gershgorin row bound. The result is clamped
// at zero; H is positive semidefinite up to roundoff.
inline double hessian_min_eig(const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& y,
                              const Eigen::VectorXd& theta) {
  check_glm_labels(y);
  const Eigen::MatrixXd h = logistic_hessian(x, y, theta);
  const Eigen::Index d = h.cols();
  double s = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    s = std::max(s, h.row(i).cwiseAbs().sum());
  }
  if (s == 0.0) {
    return 0.0;
  }
  Eigen::MatrixXd m = -h;
  m.diagonal().array() += s;
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    v(i) = 1.0 / static_cast<double>(i + 1);
  }
  v.normalize();
  double rho = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    const Eigen::VectorXd mv = m * v;
    const double next = v.dot(mv);
    const double norm = mv.norm();
    if (norm == 0.0) {
      rho = 0.0;
      break;
    }
    v = mv / norm;
    if (iter > 0 && std::fabs(next - rho) <= 1e-8 * std::max(1.0, next)) {
      rho = next;
      break;
    }
    rho = next;
  }
  const double lambda_min = s - rho;
  return lambda_min > 0.0 ? lambda_min : 0.0;
}

// Global sensitivity of lambda_min(Hessian at the optimum), valid whenever
// the regularizer satisfies lambda >= r_bound * lipschitz.
inline double lambda_min_global_sensitivity(double r_bound, double lipschitz,
                                            double smoothness) {
  return 2.0 * r_bound * lipschitz + smoothness;
}

// Lower bound on lambda_min, private at (eps/2, delta/2).
inline double release_lambda_min_glm(double lambda_min, double sensitivity,
                                     double eps, double delta,
                                     RandomSource& rng) {
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::domain_error("release_lambda_min_glm: bad budget");
  }
  if (!(sensitivity > 0.0)) {
    throw std::domain_error("release_lambda_min_glm: bad sensitivity");
  }
  const double scale = 2.0 / eps;
  const double noised =
      lambda_min +
      std::sqrt(std::log(4.0 / delta)) * scale * sensitivity *
          rng.gaussian(1.0) -
      std::sqrt(2.0 * std::log(4.0 / delta) * std::log(1.0 / delta)) * scale *
          sensitivity;
  return noised > 0.0 ? noised : 0.0;
}

// Data-dependent privacy loss of the Gaussian output perturbation with
// inverse temperature gamma when the regularized objective is alpha-strongly
// convex around the optimum.
inline double glm_data_dep_dp(double gamma, double lipschitz, double r_bound,
                              double smoothness, double alpha, double delta) {
  if (!(gamma >= 0.0)) {
    throw std::domain_error("glm_data_dep_dp: gamma must be >= 0");
  }
  if (!(alpha > 0.0)) {
    throw std::domain_error("glm_data_dep_dp: alpha must be positive");
  }
  if (!(delta > 0.0 && delta <= 2.0 * std::exp(-1.0))) {
    throw std::domain_error("glm_data_dep_dp: delta must be in (0, 2/e]");
  }
  const double log_term = std::log(2.0 / delta);
  const double gl2 = gamma * lipschitz * lipschitz / alpha;
  return r_bound * (lipschitz + smoothness) * (1.0 + log_term) / alpha + gl2 +
         std::sqrt(gl2 * log_term);
}

// Largest gamma with glm_data_dep_dp(gamma) <= eps_target, by inverting the
// quadratic in sqrt(gamma L^2 / alpha). The gamma-free term
// r (L + beta)(1 + log(2/delta)) / alpha is a feasibility floor.
inline double calibrate_gamma_glm(double eps_target, double delta,
                                  double lipschitz, double r_bound,
                                  double smoothness, double alpha) {
  if (!(eps_target > 0.0)) {
    throw std::domain_error("calibrate_gamma_glm: bad target");
  }
  if (!(alpha > 0.0)) {
    throw std::domain_error("calibrate_gamma_glm: alpha must be positive");
  }
  if (!(lipschitz > 0.0)) {
    throw std::domain_error("calibrate_gamma_glm: bad lipschitz");
  }
  const double log_term = std::log(2.0 / delta);
  const double floor =
      r_bound * (lipschitz + smoothness) * (1.0 + log_term) / alpha;
  if (!(eps_target > floor)) {
    throw InfeasibleError("calibrate_gamma_glm: target below the floor");
  }
  const double s =
      0.5 * (-std::sqrt(log_term) +
             std::sqrt(log_term + 4.0 * (eps_target - floor)));
  return s * s * alpha / (lipschitz * lipschitz);
}

struct GlmPtrResult {
  Eigen::VectorXd theta;
  double gamma = 0.0;
  double lambda_min_private = 0.0;
  double eps_sanitized = 0.0;
  PrivacyBudget budget;
};

// Output perturbation pipeline at a fixed lambda: fit, privately
// lower-bound the Hessian's smallest eigenvalue at (eps/2, delta/2),
// calibrate gamma so the perturbed release costs (eps/2, delta/2) against
// alpha = lambda_min^p + lambda, then draw
// theta ~ N(theta*, (gamma (H + lambda I))^{-1}). Declared per-candidate
// total: (eps, 2 delta). Raises InfeasibleError when no positive gamma
// meets the target at this lambda.
inline GlmPtrResult glm_ptr_run(const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& y, double lambda,
                                double eps, double delta, double r_bound,
                                RandomSource& rng) {
  if (!(r_bound > 0.0)) {
    throw std::domain_error("glm_ptr_run: r_bound must be positive");
  }
  if (!(lambda >= r_bound * kLogisticLipschitz)) {
    throw std::domain_error(
        "glm_ptr_run: lambda below the sensitivity precondition r * L");
  }
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 0.5)) {
    throw std::domain_error("glm_ptr_run: bad budget");
  }
  GlmPtrResult result;
  const Eigen::VectorXd theta_star = fit_regularized(x, y, lambda);
  const double lambda_min = hessian_min_eig(x, y, theta_star);
  const double sensitivity = lambda_min_global_sensitivity(
      r_bound, kLogisticLipschitz, kLogisticSmoothness);
  result.lambda_min_private =
      release_lambda_min_glm(lambda_min, sensitivity, eps, delta, rng);
  const double alpha = result.lambda_min_private + lambda;
  result.gamma =
      calibrate_gamma_glm(eps / 2.0, delta / 2.0, kLogisticLipschitz, r_bound,
                          kLogisticSmoothness, alpha);
  if (!(result.gamma > 0.0)) {
    throw InfeasibleError("glm_ptr_run: calibrated gamma is not positive");
  }
  result.eps_sanitized =
      glm_data_dep_dp(result.gamma, kLogisticLipschitz, r_bound,
                      kLogisticSmoothness, alpha, delta / 2.0);
  Eigen::MatrixXd precision = logistic_hessian(x, y, theta_star);
  precision.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  Eigen::VectorXd z(x.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = rng.gaussian(1.0);
  }
  result.theta =
      theta_star + llt.matrixU().solve(z) / std::sqrt(result.gamma);
  result.budget = PrivacyBudget(eps, 2.0 * delta);
  return result;
}

}  // namespace adadp

#endif  // ADADP_GLM_SC_HPP_

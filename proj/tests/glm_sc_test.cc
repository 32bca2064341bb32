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
#include "adadp/glm_sc.hpp"

#include <cmath>
#include <cstdint>

#include "Eigen/Core"
#include "Eigen/Eigenvalues"
#include "adadp/random.hpp"
#include "gtest/gtest.h"

namespace adadp {
namespace {

Eigen::MatrixXd synthetic_rows(int n, int d, RandomSource& rng) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd g(d);
    for (int j = 0; j < d; ++j) g(j) = rng.gaussian(1.0);
    x.row(i) = g.transpose() * (0.95 / g.norm());
  }
  return x;
}

Eigen::VectorXd synthetic_labels(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& theta,
                                 RandomSource& rng) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double noisy = x.row(i).dot(theta) + 0.3 * rng.gaussian(1.0);
    y(i) = noisy >= 0.0 ? 1.0 : -1.0;
  }
  return y;
}

TEST(LogisticDerivativesTest, ValuesAtZero) {
  const LogisticDerivs l = logistic_derivatives(0.0);
  EXPECT_NEAR(l.value, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(l.d1, -0.5);
  EXPECT_DOUBLE_EQ(l.d2, 0.25);
  EXPECT_DOUBLE_EQ(l.d3, 0.0);
}

TEST(LogisticDerivativesTest, StableAtExtremeMargins) {
  const LogisticDerivs pos = logistic_derivatives(800.0);
  EXPECT_EQ(pos.value, 0.0);
  EXPECT_NEAR(pos.d1, 0.0, 1e-300);
  EXPECT_NEAR(pos.d2, 0.0, 1e-300);
  const LogisticDerivs neg = logistic_derivatives(-800.0);
  EXPECT_DOUBLE_EQ(neg.value, 800.0);
  EXPECT_DOUBLE_EQ(neg.d1, -1.0);
  EXPECT_NEAR(neg.d2, 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(neg.d3));
}

TEST(LogisticDerivativesTest, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (double u : {-3.0, -1.0, 0.5, 2.0}) {
    const LogisticDerivs l = logistic_derivatives(u);
    const LogisticDerivs lp = logistic_derivatives(u + h);
    const LogisticDerivs lm = logistic_derivatives(u - h);
    EXPECT_NEAR(l.d1, (lp.value - lm.value) / (2.0 * h), 1e-8);
    EXPECT_NEAR(l.d2, (lp.d1 - lm.d1) / (2.0 * h), 1e-8);
    EXPECT_NEAR(l.d3, (lp.d2 - lm.d2) / (2.0 * h), 1e-8);
  }
}

TEST(LogisticDerivativesTest, BoundsHoldEverywhere) {
  for (double u = -30.0; u <= 30.0; u += 0.1) {
    const LogisticDerivs l = logistic_derivatives(u);
    EXPECT_GE(l.d1, -1.0);
    EXPECT_LE(l.d1, 0.0);
    EXPECT_GE(l.d2, 0.0);
    EXPECT_LE(l.d2, 0.25);
    EXPECT_LE(std::fabs(l.d3), l.d2 + 1e-18);
  }
}

TEST(FitRegularizedTest, GradientVanishesAtTheSolution) {
  RandomSource rng(12);
  const Eigen::MatrixXd x = synthetic_rows(120, 4, rng);
  Eigen::VectorXd theta_true(4);
  theta_true << 1.0, -0.5, 0.25, 0.0;
  const Eigen::VectorXd y = synthetic_labels(x, theta_true, rng);
  const double lambda = 2.0;
  const Eigen::VectorXd theta = fit_regularized(x, y, lambda);
  Eigen::VectorXd grad = lambda * theta;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double u = y(i) * x.row(i).dot(theta);
    grad += logistic_derivatives(u).d1 * y(i) * x.row(i).transpose();
  }
  EXPECT_LE(grad.norm(), 1e-8);
}

TEST(FitRegularizedTest, SymmetricDataGivesZero) {
  RandomSource rng(13);
  const Eigen::MatrixXd half = synthetic_rows(25, 3, rng);
  Eigen::MatrixXd x(50, 3);
  x << half, half;
  Eigen::VectorXd y(50);
  for (int i = 0; i < 25; ++i) {
    y(i) = 1.0;
    y(25 + i) = -1.0;
  }
  const Eigen::VectorXd theta = fit_regularized(x, y, 2.0);
  EXPECT_LE(theta.norm(), 1e-8);
}

TEST(FitRegularizedTest, RejectsBadLabels) {
  Eigen::MatrixXd x(1, 2);
  x << 0.5, 0.5;
  Eigen::VectorXd y(1);
  y << 0.0;
  EXPECT_THROW(fit_regularized(x, y, 2.0), std::invalid_argument);
}

TEST(HessianMinEigTest, AgreesWithADirectEigensolve) {
  RandomSource rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 4;
    const Eigen::MatrixXd x = synthetic_rows(30 + trial, d, rng);
    Eigen::VectorXd theta(d);
    for (int j = 0; j < d; ++j) theta(j) = rng.gaussian(0.5);
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    const Eigen::MatrixXd h = logistic_hessian(x, y, theta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    const double expected = std::max(solver.eigenvalues().minCoeff(), 0.0);
    EXPECT_NEAR(hessian_min_eig(x, y, theta), expected,
                1e-5 * std::max(1.0, expected));
  }
}

TEST(HessianMinEigTest, ZeroMatrixGivesZero) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  Eigen::VectorXd y(3);
  y << 1.0, -1.0, 1.0;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  EXPECT_EQ(hessian_min_eig(x, y, theta), 0.0);
}

// Frozen oracle: the logistic constants R = L = 1, beta = 1/4 give
// sensitivity 2.25.
TEST(LambdaMinSensitivityTest, LogisticConstants) {
  EXPECT_DOUBLE_EQ(lambda_min_global_sensitivity(1.0, kLogisticLipschitz,
                                                 kLogisticSmoothness),
                   2.25);
}

TEST(ReleaseLambdaMinGlmTest, DeterministicNonnegativeAndCovering) {
  RandomSource a(5);
  RandomSource b(5);
  EXPECT_DOUBLE_EQ(release_lambda_min_glm(3.0, 2.25, 1.0, 0.05, a),
                   release_lambda_min_glm(3.0, 2.25, 1.0, 0.05, b));
  const double delta = 0.05;
  const double lambda_min = 8.0;
  const int n = 20000;
  RandomSource rng(6);
  int overshoots = 0;
  for (int i = 0; i < n; ++i) {
    const double released =
        release_lambda_min_glm(lambda_min, 2.25, 1.0, delta, rng);
    EXPECT_GE(released, 0.0);
    if (released > lambda_min) ++overshoots;
  }
  EXPECT_LE(static_cast<double>(overshoots) / n, delta);
}

TEST(ReleaseLambdaMinGlmTest, CentersOnTheShiftedValue) {
  const double eps = 1.0;
  const double delta = 0.05;
  const double gs = 2.25;
  const double lambda_min = 200.0;
  const double sigma = std::sqrt(std::log(4.0 / delta)) * 2.0 / eps * gs;
  const double shift = std::sqrt(2.0 * std::log(4.0 / delta) *
                                 std::log(1.0 / delta)) *
                       2.0 / eps * gs;
  const int n = 50000;
  RandomSource rng(31);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += release_lambda_min_glm(lambda_min, gs, eps, delta, rng);
  }
  EXPECT_NEAR(sum / n, lambda_min - shift, 3.0 * sigma / std::sqrt(n));
}

// Frozen closed form: R = L = alpha = gamma = 1, beta = 1/4, and
// log(2/delta) = 1 give 1.25 * 2 + 1 + 1 = 4.5.
TEST(GlmDataDepDpTest, MatchesClosedFormOracle) {
  const double delta = 2.0 * std::exp(-1.0);
  EXPECT_NEAR(glm_data_dep_dp(1.0, 1.0, 1.0, 0.25, 1.0, delta), 4.5, 1e-12);
}

TEST(GlmDataDepDpTest, MonotoneInGammaAndCurvature) {
  double prev = glm_data_dep_dp(0.0, 1.0, 1.0, 0.25, 2.0, 1e-6);
  for (double gamma = 0.25; gamma <= 8.0; gamma *= 2.0) {
    const double cur = glm_data_dep_dp(gamma, 1.0, 1.0, 0.25, 2.0, 1e-6);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
  EXPECT_GT(glm_data_dep_dp(1.0, 1.0, 1.0, 0.25, 2.0, 1e-6),
            glm_data_dep_dp(1.0, 1.0, 1.0, 0.25, 20.0, 1e-6));
}

TEST(CalibrateGammaGlmTest, RoundTripsThroughTheLossFormula) {
  const double delta = 5e-7;
  for (double alpha : {2.0, 11.0}) {
    for (double target : {11.0, 15.0, 30.0}) {
      const double gamma =
          calibrate_gamma_glm(target, delta, 1.0, 1.0, 0.25, alpha);
      EXPECT_GT(gamma, 0.0);
      EXPECT_NEAR(glm_data_dep_dp(gamma, 1.0, 1.0, 0.25, alpha, delta),
                  target, 1e-9 * target);
    }
  }
}

TEST(CalibrateGammaGlmTest, TargetBelowTheFloorIsInfeasible) {
  const double delta = 1e-6;
  const double alpha = 2.0;
  const double floor = glm_data_dep_dp(0.0, 1.0, 1.0, 0.25, alpha, delta);
  EXPECT_THROW(calibrate_gamma_glm(floor * 0.99, delta, 1.0, 1.0, 0.25, alpha),
               InfeasibleError);
  EXPECT_GT(calibrate_gamma_glm(floor * 1.01, delta, 1.0, 1.0, 0.25, alpha),
            0.0);
}

// Pseudo self-concordance of the logistic loss: shifting the parameter by v
// rescales every Hessian quadratic form by at most exp(R ||v||) with R
// bounding the row norms.
TEST(HessianSandwichTest, QuadraticFormsStayWithinTheExponentialEnvelope) {
  RandomSource rng(88);
  const Eigen::MatrixXd x = synthetic_rows(40, 3, rng);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd theta(3);
    Eigen::VectorXd v(3);
    for (int j = 0; j < 3; ++j) {
      theta(j) = rng.gaussian(0.5);
      v(j) = rng.gaussian(0.3);
    }
    const Eigen::MatrixXd h0 = logistic_hessian(x, y, theta);
    const Eigen::MatrixXd h1 = logistic_hessian(x, y, theta + v);
    const double envelope = std::exp(1.0 * v.norm());
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::VectorXd w(3);
      for (int j = 0; j < 3; ++j) w(j) = rng.gaussian(1.0);
      const double q0 = w.dot(h0 * w);
      const double q1 = w.dot(h1 * w);
      EXPECT_LE(q1, envelope * q0 * (1.0 + 1e-12));
      EXPECT_GE(q1, q0 / envelope * (1.0 - 1e-12));
    }
  }
}

TEST(GlmPtrRunTest, ProducesACalibratedSample) {
  RandomSource data_rng(301);
  const int n = 300;
  const int d = 4;
  const Eigen::MatrixXd x = synthetic_rows(n, d, data_rng);
  Eigen::VectorXd theta_true(d);
  theta_true << 1.0, -1.0, 0.5, 0.0;
  const Eigen::VectorXd y = synthetic_labels(x, theta_true, data_rng);
  const double eps = 12.0;
  const double delta = 1e-6;

  RandomSource rng(7);
  const GlmPtrResult run = glm_ptr_run(x, y, 4.0, eps, delta, 1.0, rng);
  EXPECT_GT(run.gamma, 0.0);
  EXPECT_GE(run.lambda_min_private, 0.0);
  EXPECT_TRUE(run.theta.allFinite());
  EXPECT_DOUBLE_EQ(run.budget.epsilon, eps);
  EXPECT_DOUBLE_EQ(run.budget.delta, 2.0 * delta);
  EXPECT_NEAR(run.eps_sanitized, eps / 2.0, 1e-9 * eps);

  RandomSource rng2(7);
  const GlmPtrResult rerun = glm_ptr_run(x, y, 4.0, eps, delta, 1.0, rng2);
  EXPECT_EQ(run.theta, rerun.theta);
}

TEST(GlmPtrRunTest, EnforcesTheLambdaPrecondition) {
  Eigen::MatrixXd x(2, 2);
  x << 0.5, 0.0, 0.0, 0.5;
  Eigen::VectorXd y(2);
  y << 1.0, -1.0;
  RandomSource rng(1);
  EXPECT_THROW(glm_ptr_run(x, y, 0.5, 1.0, 1e-6, 1.0, rng),
               std::domain_error);
}

TEST(GlmPtrRunTest, TinyBudgetIsInfeasible) {
  RandomSource data_rng(302);
  const Eigen::MatrixXd x = synthetic_rows(50, 3, data_rng);
  Eigen::VectorXd theta_true(3);
  theta_true << 0.5, 0.5, -0.5;
  const Eigen::VectorXd y = synthetic_labels(x, theta_true, data_rng);
  RandomSource rng(2);
  EXPECT_THROW(glm_ptr_run(x, y, 2.0, 0.01, 1e-6, 1.0, rng),
               InfeasibleError);
}

TEST(GlmPtrRunTest, SampleCentersOnTheFit) {
  RandomSource data_rng(303);
  const int n = 200;
  const int d = 3;
  const Eigen::MatrixXd x = synthetic_rows(n, d, data_rng);
  Eigen::VectorXd theta_true(d);
  theta_true << 0.8, -0.4, 0.2;
  const Eigen::VectorXd y = synthetic_labels(x, theta_true, data_rng);
  const double lambda = 4.0;
  const double eps = 12.0;
  const double delta = 1e-6;
  const Eigen::VectorXd center = fit_regularized(x, y, lambda);

  RandomSource rng(99);
  const int reps = 1500;
  double sum = 0.0;
  double gamma = 0.0;
  for (int r = 0; r < reps; ++r) {
    const GlmPtrResult run = glm_ptr_run(x, y, lambda, eps, delta, 1.0, rng);
    sum += run.theta(0);
    gamma = run.gamma;
  }
  Eigen::MatrixXd precision = logistic_hessian(x, y, center);
  precision.diagonal().array() += lambda;
  const Eigen::MatrixXd cov = precision.inverse() / gamma;
  EXPECT_NEAR(sum / reps, center(0), 4.0 * std::sqrt(cov(0, 0) / reps));
}

}  // namespace
}  // namespace adadp

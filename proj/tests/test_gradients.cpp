// Copyright 2026 The qmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qmoe/gradients.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace qmoe;

namespace {

constexpr double kPi = std::numbers::pi;

/// Central differences through the dense-matrix oracle, not the simulator.
Eigen::MatrixXd oracle_jacobian(int n, int L, std::vector<double> theta, const std::vector<double>& x, double h) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXd jac(dim, static_cast<Eigen::Index>(theta.size()));
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double t = theta[j];
    theta[j] = t + h;
    const Eigen::VectorXd plus = oracle::run_layered(n, L, theta, x).cwiseAbs2();
    theta[j] = t - h;
    const Eigen::VectorXd minus = oracle::run_layered(n, L, theta, x).cwiseAbs2();
    theta[j] = t;
    jac.col(static_cast<Eigen::Index>(j)) = (plus - minus) / (2 * h);
  }
  return jac;
}

}  // namespace

TEST(JacobianAdjoint, SingleQubitExamples) {
  const auto spec = CircuitSpec::layered(1, 1);
  const std::vector<double> x{0};
  const auto at0 = jacobian_adjoint(spec, ParamVector{0.0}, x);
  EXPECT_NEAR(at0(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(at0(1, 0), 0.0, 1e-15);
  const auto at_half = jacobian_adjoint(spec, ParamVector{kPi / 2}, x);
  EXPECT_NEAR(at_half(1, 0), 0.5, 1e-14);
  EXPECT_NEAR(at_half(0, 0), -0.5, 1e-14);
}

TEST(JacobianParameterShift, MatchesAdjointOnExamples) {
  const auto spec = CircuitSpec::layered(1, 1);
  const std::vector<double> x{0};
  for (double t : {0.0, kPi / 2}) {
    const auto a = jacobian_adjoint(spec, ParamVector{t}, x);
    const auto s = jacobian_parameter_shift(spec, ParamVector{t}, x);
    EXPECT_LT((a - s).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(JacobianParameterShift, EmptyForEmbeddingOnlyCircuit) {
  const std::vector<double> x{0.3, 0.1};
  const auto j = jacobian_parameter_shift(CircuitSpec::layered(2, 0), ParamVector{}, x);
  EXPECT_EQ(j.rows(), 4);
  EXPECT_EQ(j.cols(), 0);
  EXPECT_EQ(jacobian_adjoint(CircuitSpec::layered(2, 0), ParamVector{}, x).cols(), 0);
}

TEST(JacobianFiniteDiff, ZeroAtExtremumAndRejectsBadStep) {
  const auto spec = CircuitSpec::layered(1, 1);
  const std::vector<double> x{0};
  const auto j = jacobian_finite_diff(spec, ParamVector{0.0}, x);
  EXPECT_NEAR(j(0, 0), 0.0, 1e-6);
  EXPECT_THROW(jacobian_finite_diff(spec, ParamVector{0.0}, x, 0.0), std::invalid_argument);
  EXPECT_THROW(jacobian_finite_diff(spec, ParamVector{0.0}, x, -1e-3), std::invalid_argument);
}

TEST(JacobianFiniteDiff, SecondOrderConvergence) {
  const auto spec = CircuitSpec::layered(2, 2);
  const ParamVector theta{0.3, -0.7, 1.1, 0.4};
  const std::vector<double> x{0.9, 2.1};
  const auto exact = jacobian_parameter_shift(spec, theta, x);
  const double e1 = (jacobian_finite_diff(spec, theta, x, 2e-2) - exact).cwiseAbs().maxCoeff();
  const double e2 = (jacobian_finite_diff(spec, theta, x, 1e-2) - exact).cwiseAbs().maxCoeff();
  EXPECT_GT(e1 / e2, 3.6);
  EXPECT_LT(e1 / e2, 4.4);
}

TEST(Jacobians, RandomizedBackendEquivalence) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 4;
    const int L = trial % 7;
    const auto spec = CircuitSpec::layered(n, L);
    const ParamVector theta(oracle::uniform_vec(rng, spec.n_params(), -kPi, kPi));
    const auto x = oracle::uniform_vec(rng, static_cast<std::size_t>(n), 0, kPi);
    const auto adj = jacobian_adjoint(spec, theta, x);
    const auto ps = jacobian_parameter_shift(spec, theta, x);
    const auto fd = jacobian_finite_diff(spec, theta, x, 1e-5);
    if (spec.n_params() == 0) continue;
    EXPECT_LT((adj - ps).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((adj - fd).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT(adj.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    const auto dense = oracle_jacobian(n, L, theta.values, x, 1e-5);
    EXPECT_LT((adj - dense).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Jacobians, N3L4MatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  const auto spec = CircuitSpec::layered(3, 4);
  const ParamVector theta(oracle::uniform_vec(rng, spec.n_params(), -kPi, kPi));
  const auto x = oracle::uniform_vec(rng, 3, 0, kPi);
  const auto ps = jacobian_parameter_shift(spec, theta, x);
  EXPECT_LT((ps - jacobian_finite_diff(spec, theta, x, 1e-5)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Jacobians, ExecutionCounts) {
  const std::vector<double> x{0.2, 0.4, 0.6};
  for (int L : {1, 3, 6}) {
    const auto spec = CircuitSpec::layered(3, L);
    const ParamVector theta(spec.n_params(), 0.3);
    GateTally adj, ps;
    jacobian_adjoint(spec, theta, x, &adj);
    jacobian_parameter_shift(spec, theta, x, &ps);
    EXPECT_EQ(adj.circuit_runs, 1u) << "L=" << L;
    EXPECT_EQ(ps.circuit_runs, 2 * spec.n_params());
    // Backward sweep: one un-apply of psi plus one per bra, per gate.
    const std::size_t gates = spec.gate_plan().size();
    EXPECT_EQ(adj.gate_applications, gates + gates * (1 + 8));
  }
}

TEST(ProbabilityVjp, AllBackendsAgreeWithJacobianContraction) {
  std::mt19937_64 rng(5);
  const auto spec = CircuitSpec::layered(3, 3);
  const ParamVector theta(oracle::uniform_vec(rng, spec.n_params(), -kPi, kPi));
  const auto x = oracle::uniform_vec(rng, 3, 0, kPi);
  const auto w = oracle::uniform_vec(rng, 8, -2, 2);
  const Eigen::VectorXd expected =
      jacobian_parameter_shift(spec, theta, x).transpose() * Eigen::Map<const Eigen::VectorXd>(w.data(), 8);
  for (auto backend : {GradientBackend::Adjoint, GradientBackend::ParameterShift, GradientBackend::FiniteDiff}) {
    const auto vjp = probability_vjp(backend, spec, theta, x, w);
    const double tol = backend == GradientBackend::FiniteDiff ? 1e-4 : 1e-10;
    for (std::size_t j = 0; j < spec.n_params(); ++j) {
      EXPECT_NEAR(vjp.gradient[j], expected(static_cast<Eigen::Index>(j)), tol) << to_string(backend);
    }
  }
  GateTally tally;
  probability_vjp(GradientBackend::Adjoint, spec, theta, x, w, &tally);
  EXPECT_EQ(tally.circuit_runs, 1u);
}

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

#include "qmoe/noise_sim.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace qmoe;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXcd random_density(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {g(rng), g(rng)};
  Eigen::MatrixXcd rho = a * a.adjoint();
  return rho / rho.trace();
}

void expect_valid_density(const DensityMatrix& rho) {
  const auto& m = rho.entries();
  EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
  EXPECT_NEAR(rho.trace().imag(), 0.0, 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
}

}  // namespace

TEST(ToDensity, Examples) {
  const auto zero = to_density(QuantumState(1));
  EXPECT_EQ(zero.entries()(0, 0), Amplitude(1.0));
  EXPECT_EQ(zero.entries()(1, 1), Amplitude(0.0));
  const double r = 1 / std::sqrt(2.0);
  const auto plus = to_density(QuantumState(1, std::vector<Amplitude>{r, r}));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(plus.entries().data()[i].real(), 0.5, 1e-15);
  std::mt19937_64 rng(1);
  const auto x = oracle::uniform_vec(rng, 3, 0, kPi);
  EXPECT_NEAR(to_density(angle_embed(x, 3)).purity(), 1.0, 1e-12);
}

TEST(ApplyGateNoisy, ZeroNoiseIsPlainConjugation) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const Eigen::MatrixXcd rho = random_density(rng, n);
    const int q = trial % n;
    const double t = oracle::uniform_vec(rng, 1, -kPi, kPi)[0];
    const Eigen::MatrixXcd U = oracle::embed_1q(oracle::ry(t), q, n);
    const auto got = apply_gate_noisy(DensityMatrix(n, rho), UnitaryGate::ry(q, t), 0.0);
    EXPECT_LT((got.entries() - U * rho * U.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    if (n >= 2) {
      const Eigen::MatrixXcd C = oracle::cz(0, 1, n);
      const auto gz = apply_gate_noisy(DensityMatrix(n, rho), UnitaryGate::cz(0, 1), 0.0);
      EXPECT_LT((gz.entries() - C * rho * C.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ApplyGateNoisy, ThreeQuarterRateIsFullyDepolarizing) {
  const auto out = apply_gate_noisy(to_density(QuantumState(1)), UnitaryGate::identity(0), 0.75);
  EXPECT_NEAR(std::abs(out.entries()(0, 0) - 0.5), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(out.entries()(1, 1) - 0.5), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(out.entries()(0, 1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(out.entries()(1, 0)), 0.0, 1e-12);
}

TEST(ApplyGateNoisy, RejectsRateOutOfRange) {
  EXPECT_THROW(apply_gate_noisy(DensityMatrix(1), UnitaryGate::identity(0), -0.01), std::invalid_argument);
  EXPECT_THROW(apply_gate_noisy(DensityMatrix(1), UnitaryGate::identity(0), 1.01), std::invalid_argument);
}

TEST(Depolarize, BlockFormMatchesPauliSum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eps(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3;
    const int q = trial % n;
    const double e = eps(rng);
    const Eigen::MatrixXcd rho = random_density(rng, n);
    DensityMatrix dm(n, rho);
    depolarize(dm, q, e);
    EXPECT_LT((dm.entries() - oracle::depolarize(rho, q, n, e)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(std::abs(dm.trace() - Amplitude(1.0)), 0.0, 1e-12);
  }
}

TEST(Depolarize, TwoApplicationsComposeToOne) {
  std::mt19937_64 rng(4);
  for (double e : {0.0, 0.01, 0.05, 0.2, 0.5, 0.75}) {
    const Eigen::MatrixXcd rho = random_density(rng, 1);
    const Eigen::MatrixXcd twice = oracle::depolarize(oracle::depolarize(rho, 0, 1, e), 0, 1, e);
    const double composed = e * (2 - 4 * e / 3);
    EXPECT_LT((twice - oracle::depolarize(rho, 0, 1, composed)).cwiseAbs().maxCoeff(), 1e-12);
    DensityMatrix dm(1, rho);
    depolarize(dm, 0, e);
    depolarize(dm, 0, e);
    EXPECT_LT((dm.entries() - twice).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RunCircuitNoisy, ZeroNoiseMatchesStatevector) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3;
    const int L = trial % 5;
    const auto spec = CircuitSpec::layered(n, L);
    const ParamVector theta(oracle::uniform_vec(rng, spec.n_params(), -kPi, kPi));
    const auto x = oracle::uniform_vec(rng, static_cast<std::size_t>(n), 0, kPi);
    const auto pure = measure_probabilities(run_circuit(spec, theta, x));
    const auto noisy = run_circuit_noisy(spec, theta, x, 0.0);
    for (std::size_t b = 0; b < pure.size(); ++b) EXPECT_NEAR(pure[b], noisy[b], 1e-10);
  }
}

TEST(RunCircuitNoisy, SingleNoisyGateAtThreeQuartersIsUniform) {
  const std::vector<double> x{0.7};
  const auto p = run_circuit_noisy(CircuitSpec::layered(1, 1), ParamVector{0.4}, x, 0.75);
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(RunCircuitNoisy, FullNoiseApproachesUniform) {
  const std::vector<double> x{0.7, 2.0};
  const auto p = run_circuit_noisy(CircuitSpec::layered(2, 3), ParamVector(6, 0.9), x, 1.0);
  for (double v : p) EXPECT_NEAR(v, 0.25, 0.02);
}

TEST(RunCircuitNoisy, ValidDensityAndMonotonePurity) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 2;
    const auto spec = CircuitSpec::layered(n, 3);
    const ParamVector theta(oracle::uniform_vec(rng, spec.n_params(), -kPi, kPi));
    const auto x = oracle::uniform_vec(rng, static_cast<std::size_t>(n), 0, kPi);
    double last = 2.0;
    for (double e : {0.0, 0.01, 0.02, 0.03, 0.04, 0.05}) {
      const auto rho = run_circuit_noisy_density(spec, theta, x, e);
      expect_valid_density(rho);
      EXPECT_LE(rho.purity(), last + 1e-12);
      last = rho.purity();
      double total = 0;
      for (double p : run_circuit_noisy(spec, theta, x, e)) {
        EXPECT_GE(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
  }
}

TEST(RunCircuitNoisy, EmbeddingNoiseIsOptIn) {
  const std::vector<double> x{0.3, 1.2};
  const auto spec = CircuitSpec::layered(2, 0);
  const auto clean = run_circuit_noisy(spec, ParamVector{}, x, 0.05);
  const auto pure = measure_probabilities(angle_embed(x, 2));
  for (std::size_t b = 0; b < 4; ++b) EXPECT_NEAR(clean[b], pure[b], 1e-12);
  const auto noisy = run_circuit_noisy(spec, ParamVector{}, x, 0.05, NoiseOptions{true});
  EXPECT_GT(std::abs(noisy[0] - pure[0]), 1e-3);
}

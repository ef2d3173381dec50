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

#include "qmoe/quantum_core.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace qmoe;

namespace {

constexpr double kPi = std::numbers::pi;

void expect_amplitudes(const QuantumState& s, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(s.dim(), expected.size());
  for (std::size_t b = 0; b < expected.size(); ++b) {
    EXPECT_NEAR(s[b].real(), expected[b], tol) << "basis " << b;
    EXPECT_NEAR(s[b].imag(), 0.0, tol) << "basis " << b;
  }
}

}  // namespace

TEST(AngleEmbed, ZeroIsGroundState) {
  const std::vector<double> x{0, 0};
  expect_amplitudes(angle_embed(x, 2), {1, 0, 0, 0});
}

TEST(AngleEmbed, QubitZeroIsMostSignificant) {
  const std::vector<double> x{kPi, 0};
  expect_amplitudes(angle_embed(x, 2), {0, 0, 1, 0});
}

TEST(AngleEmbed, HalfTurnGivesUniformAmplitudes) {
  const std::vector<double> x{kPi / 2, kPi / 2};
  expect_amplitudes(angle_embed(x, 2), {0.5, 0.5, 0.5, 0.5});
}

TEST(AngleEmbed, RejectsLengthMismatch) {
  const std::vector<double> x{0.1, 0.2, 0.3};
  EXPECT_THROW(angle_embed(x, 2), DimensionError);
}

TEST(ApplyRy, Examples) {
  expect_amplitudes(apply_ry(QuantumState(1), 0, kPi), {0, 1});
  expect_amplitudes(apply_ry(QuantumState(1), 0, 0.0), {1, 0});
  expect_amplitudes(apply_ry(QuantumState(1), 0, kPi / 2), {1 / std::sqrt(2.0), 1 / std::sqrt(2.0)});
  EXPECT_THROW(apply_ry(QuantumState(2), 2, 0.1), DimensionError);
  EXPECT_THROW(apply_ry(QuantumState(2), -1, 0.1), DimensionError);
}

TEST(ApplyCz, Examples) {
  expect_amplitudes(apply_cz(QuantumState(2, 3), 0, 1), {0, 0, 0, -1});
  expect_amplitudes(apply_cz(QuantumState(2, 1), 0, 1), {0, 1, 0, 0});
  QuantumState plus(2, std::vector<Amplitude>{0.5, 0.5, 0.5, 0.5});
  expect_amplitudes(apply_cz(plus, 0, 1), {0.5, 0.5, 0.5, -0.5});
  EXPECT_THROW(apply_cz(QuantumState(2), 0, 0), DimensionError);
  EXPECT_THROW(apply_cz(QuantumState(2), 0, 5), DimensionError);
}

TEST(CircuitSpec, LayeredLayoutInvariants) {
  for (int n = 1; n <= 5; ++n) {
    for (int L = 0; L <= 4; ++L) {
      const auto spec = CircuitSpec::layered(n, L);
      EXPECT_EQ(spec.n_params(), static_cast<std::size_t>(n * L));
      std::size_t ry = 0;
      for (const auto& g : spec.gate_plan()) {
        if (g.kind == GateKind::RY) ++ry;
        if (g.kind == GateKind::CZ) EXPECT_EQ(std::abs(g.qubit - g.other), 1);
      }
      EXPECT_EQ(ry, spec.n_params());
    }
  }
  // Embedding comes first, then RY block then ascending CZ chain.
  const auto spec = CircuitSpec::layered(3, 1);
  const std::vector<GateOp> expected{GateOp::angle_embed(0, 0), GateOp::angle_embed(1, 1), GateOp::angle_embed(2, 2),
                                     GateOp::ry(0, 0),          GateOp::ry(1, 1),          GateOp::ry(2, 2),
                                     GateOp::cz(0, 1),          GateOp::cz(1, 2)};
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), spec.gate_plan().begin(), spec.gate_plan().end()));
}

TEST(CircuitSpec, RejectsBrokenPlans) {
  EXPECT_THROW(CircuitSpec(2, 1, {GateOp::ry(0, 0), GateOp::ry(1, 0)}), DimensionError);
  EXPECT_THROW(CircuitSpec(3, 1, {GateOp::ry(0, 0), GateOp::ry(1, 1), GateOp::ry(2, 2), GateOp::cz(0, 2)}),
               DimensionError);
  EXPECT_THROW(CircuitSpec(2, 1, {GateOp::ry(0, 0)}), DimensionError);
  EXPECT_NO_THROW(CircuitSpec(2, 1, {GateOp::ry(1, 1), GateOp::ry(0, 0), GateOp::cz(1, 0)}));
}

TEST(RunCircuit, Examples) {
  const std::vector<double> x2{0, 0};
  expect_amplitudes(run_circuit(CircuitSpec::layered(2, 0), ParamVector{}, x2), {1, 0, 0, 0});
  const std::vector<double> x1{0};
  expect_amplitudes(run_circuit(CircuitSpec::layered(1, 1), ParamVector{0.0}, x1), {1, 0});
  const auto s = run_circuit(CircuitSpec::layered(2, 1), ParamVector{kPi / 2, kPi / 2}, x2);
  for (double p : measure_probabilities(s)) EXPECT_NEAR(p, 0.25, 1e-12);
  EXPECT_THROW(run_circuit(CircuitSpec::layered(2, 1), ParamVector{0.1}, x2), DimensionError);
  EXPECT_THROW(run_circuit(CircuitSpec::layered(2, 1), ParamVector{0.1, 0.2}, x1), DimensionError);
}

TEST(RunCircuit, MatchesDenseKroneckerOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 3;
    const int L = trial % 5;
    const auto theta = oracle::uniform_vec(rng, static_cast<std::size_t>(n * L), -kPi, kPi);
    const auto x = oracle::uniform_vec(rng, static_cast<std::size_t>(n), 0, kPi);
    const auto got = run_circuit(CircuitSpec::layered(n, L), ParamVector(theta), x);
    const auto want = oracle::run_layered(n, L, theta, x);
    for (std::size_t b = 0; b < got.dim(); ++b) {
      EXPECT_NEAR(std::abs(got[b] - want(static_cast<Eigen::Index>(b))), 0.0, 1e-10);
    }
  }
}

TEST(Measure, Examples) {
  const auto p = measure_probabilities(QuantumState(2, 2));
  EXPECT_EQ(p, (std::vector<double>{0, 0, 1, 0}));
  const double r = 1 / std::sqrt(2.0);
  const auto bell = measure_probabilities(QuantumState(2, std::vector<Amplitude>{r, 0, 0, r}));
  EXPECT_NEAR(bell[0], 0.5, 1e-15);
  EXPECT_NEAR(bell[3], 0.5, 1e-15);
  EXPECT_EQ(bell[1], 0.0);
}

TEST(RouteProbabilities, Examples) {
  const std::vector<double> bell{0.5, 0, 0, 0.5};
  EXPECT_EQ(route_probabilities(bell, 4), bell);
  const auto two = route_probabilities(bell, 2);
  EXPECT_DOUBLE_EQ(two[0], 0.5);
  EXPECT_DOUBLE_EQ(two[1], 0.5);
  const std::vector<double> point{1, 0, 0, 0};
  EXPECT_EQ(route_probabilities(point, 2), (std::vector<double>{1, 0}));
  EXPECT_THROW(route_probabilities(bell, 0), DimensionError);
  EXPECT_THROW(route_probabilities(bell, 5), DimensionError);
}

TEST(RouteProbabilities, FirstKQubitsMapping) {
  // outcomes 00,01 -> expert 0; 10,11 -> expert 1
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const auto g = route_probabilities(p, 2, ExpertMapping::FirstKQubits);
  EXPECT_NEAR(g[0], 0.3, 1e-15);
  EXPECT_NEAR(g[1], 0.7, 1e-15);
  const auto m = route_probabilities(p, 2, ExpertMapping::Modulo);
  EXPECT_NEAR(m[0], 0.4, 1e-15);
  EXPECT_NEAR(m[1], 0.6, 1e-15);
  EXPECT_THROW(route_probabilities(p, 3, ExpertMapping::FirstKQubits), DimensionError);
}

TEST(Interference, Examples) {
  const double r = 1 / std::sqrt(2.0);
  EXPECT_NEAR(interfere_two_paths(r, 0, r, kPi), 0.0, 1e-15);
  EXPECT_NEAR(interfere_two_paths(r, 0, r, 0), 2.0, 1e-15);
  EXPECT_NEAR(interfere_two_paths(0.6, kPi / 2, 0.8, 0), 1.0, 1e-15);
}

TEST(Interference, ComplexArithmeticMatchesClosedForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0, 2), ph(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const double a1 = mag(rng), a2 = mag(rng), p1 = ph(rng), p2 = ph(rng);
    const double closed = a1 * a1 + a2 * a2 + 2 * a1 * a2 * std::cos(p1 - p2);
    EXPECT_NEAR(interfere_two_paths(a1, p1, a2, p2), closed, 1e-12);
  }
}

TEST(QuantumKernel, Examples) {
  const std::vector<double> zero{0, 0}, pis{kPi, kPi};
  EXPECT_NEAR(quantum_kernel(2, zero, pis), 0.0, 1e-15);
  const std::vector<double> a{0}, b{kPi / 2};
  EXPECT_NEAR(quantum_kernel(1, a, b), 0.5, 1e-15);
  EXPECT_THROW(quantum_kernel(2, a, zero), DimensionError);
}

TEST(Properties, NormalizationUnitarityKernel) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    const auto x = oracle::uniform_vec(rng, static_cast<std::size_t>(n), -5, 5);
    const auto xp = oracle::uniform_vec(rng, static_cast<std::size_t>(n), -5, 5);
    QuantumState s = angle_embed(x, n);
    EXPECT_NEAR(s.norm_squared(), 1.0, 1e-12);
    const int q = trial % n;
    const double theta = x[0] * 1.7;
    const QuantumState rotated = apply_ry(s, q, theta);
    EXPECT_NEAR(rotated.norm_squared(), 1.0, 1e-12);
    const QuantumState back = apply_ry(rotated, q, -theta);
    for (std::size_t b = 0; b < s.dim(); ++b) EXPECT_NEAR(std::abs(back[b] - s[b]), 0.0, 1e-12);
    if (n >= 2) {
      const QuantumState twice = apply_cz(apply_cz(rotated, 0, 1), 0, 1);
      for (std::size_t b = 0; b < s.dim(); ++b) EXPECT_EQ(twice[b], rotated[b]);
    }
    double total = 0;
    for (double p : measure_probabilities(rotated)) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    const double k1 = quantum_kernel(n, x, xp), k2 = quantum_kernel(n, xp, x);
    EXPECT_NEAR(k1, k2, 1e-12);
    EXPECT_GE(k1, 0.0);
    EXPECT_LE(k1, 1.0 + 1e-12);
    EXPECT_NEAR(quantum_kernel(n, x, x), 1.0, 1e-12);
  }
}

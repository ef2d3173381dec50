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

#include "qmoe/moe_models.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "qmoe/training.hpp"

using namespace qmoe;

namespace {

constexpr double kPi = std::numbers::pi;

RouterSpec quantum_spec(int n, int L) {
  RouterSpec s;
  s.kind = RouterKind::Quantum;
  s.n_qubits = n;
  s.n_layers = L;
  return s;
}

RouterSpec deep_spec(std::vector<int> hidden) {
  RouterSpec s;
  s.kind = RouterKind::Deep;
  s.hidden = std::move(hidden);
  return s;
}

}  // namespace

TEST(GateLinear, Examples) {
  LinearRouter r{MatrixXd::Zero(2, 3), VectorXd::Zero(2)};
  VectorXd x(3);
  x << 0.3, -1.0, 2.0;
  const VectorXd g = gate_linear(r, x);
  EXPECT_NEAR(g(0), 0.5, 1e-15);
  EXPECT_NEAR(g(1), 0.5, 1e-15);
  r.b << std::log(3.0), 0.0;
  const VectorXd h = gate_linear(r, x);
  EXPECT_NEAR(h(0), 0.75, 1e-15);
  EXPECT_NEAR(h(1), 0.25, 1e-15);
  EXPECT_THROW(gate_linear(r, VectorXd::Zero(2)), DimensionError);
}

TEST(GateLinear, ShiftInvarianceAndArgmax) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 50; ++trial) {
    LinearRouter r{MatrixXd::NullaryExpr(3, 2, [&] { return n01(rng); }),
                   VectorXd::NullaryExpr(3, [&] { return n01(rng); })};
    const VectorXd x = VectorXd::NullaryExpr(2, [&] { return n01(rng); });
    const VectorXd g = gate_linear(r, x);
    LinearRouter shifted = r;
    shifted.b.array() += 7.5 * n01(rng);
    const VectorXd gs = gate_linear(shifted, x);
    EXPECT_LT((g - gs).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::Index a = 0, b = 0;
    g.maxCoeff(&a);
    gs.maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
}

TEST(GateQuantum, Examples) {
  auto m = build_model(quantum_spec(2, 2), 2, 2, 2);
  const auto& r = std::get<QuantumRouter>(m.router);
  const VectorXd g = gate_quantum(r, VectorXd::Zero(2));
  EXPECT_NEAR(g(0), 1.0, 1e-15);
  EXPECT_NEAR(g(1), 0.0, 1e-15);

  auto one = build_model(quantum_spec(1, 1), 1, 2, 2);
  std::get<QuantumRouter>(one.router).params[0] = kPi / 2;
  const VectorXd h = gate_quantum(std::get<QuantumRouter>(one.router), VectorXd::Zero(1));
  EXPECT_NEAR(h(0), 0.5, 1e-15);
  EXPECT_NEAR(h(1), 0.5, 1e-15);

  EXPECT_THROW(gate_quantum(r, VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(build_model(quantum_spec(2, 1), 3, 2, 2), DimensionError);
  EXPECT_THROW(build_model(quantum_spec(1, 1), 1, 2, 3), DimensionError);
}

TEST(Forward, Examples) {
  auto m = build_model(RouterSpec{}, 2, 2, 1);
  m.experts[0].W << 1, 2, 3, 4;
  m.experts[0].b << 0.5, -0.5;
  VectorXd x(2);
  x << 1.0, -1.0;
  const auto fr = forward(m, x);
  EXPECT_NEAR((fr.logits - m.experts[0](x)).norm(), 0.0, 1e-15);

  auto two = build_model(RouterSpec{}, 2, 2, 2);
  two.experts[0].b << 2, 0;
  two.experts[1].b << 0, 2;
  VectorXd g(2);
  g << 1, 0;
  EXPECT_EQ(mix_experts(two, x, g), two.experts[0](x));
  g << 0.5, 0.5;
  const VectorXd y = mix_experts(two, x, g);
  EXPECT_DOUBLE_EQ(y(0), 1.0);
  EXPECT_DOUBLE_EQ(y(1), 1.0);
  EXPECT_THROW(forward(two, VectorXd::Zero(3)), DimensionError);
}

TEST(CountParameters, Examples) {
  auto q = build_model(quantum_spec(2, 12), 2, 2, 2);
  EXPECT_EQ(count_parameters(q).router, 24u);
  auto lin = build_model(RouterSpec{}, 2, 1, 2);
  EXPECT_EQ(count_parameters(lin).router, 6u);
  EXPECT_EQ(count_parameters(lin).experts, 6u);
  EXPECT_EQ(count_parameters(lin).total(), 12u);
  auto deep = build_model(deep_spec({13, 13}), 2, 2, 2);
  EXPECT_EQ(count_parameters(deep).router, 249u);
  auto mnist_deep = build_model(deep_spec({6, 8}), 8, 2, 2);
  EXPECT_EQ(count_parameters(mnist_deep).router, 128u);
  auto mnist_q = build_model(quantum_spec(8, 4), 8, 2, 2);
  EXPECT_EQ(count_parameters(mnist_q).router, 32u);

  HybridModel empty = lin;
  empty.experts.clear();
  EXPECT_EQ(count_parameters(empty).total(), 6u);
}

TEST(EfficiencyRatio, Examples) {
  EXPECT_EQ(efficiency_ratio(0.0, 12), 0.0);
  EXPECT_NEAR(efficiency_ratio(0.65, 12), 0.2534, 1e-4);
  EXPECT_NEAR(efficiency_ratio(0.94, 24), 0.2921, 1e-4);
  EXPECT_THROW(efficiency_ratio(0.5, 0), std::invalid_argument);
}

TEST(Properties, GatesAreSimplicesAndOutputsConvex) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> angle(0, kPi);
  const std::vector<RouterSpec> specs{RouterSpec{}, deep_spec({5, 4}), quantum_spec(3, 2)};
  for (const auto& spec : specs) {
    for (int trial = 0; trial < 40; ++trial) {
      auto m = build_model(spec, 3, 2, spec.kind == RouterKind::Quantum ? 3 : 4);
      initialize(m, static_cast<std::uint64_t>(trial));
      const VectorXd x = VectorXd::NullaryExpr(3, [&] { return angle(rng); });
      const auto fr = forward(m, x);
      EXPECT_NEAR(fr.gate.sum(), 1.0, 1e-12);
      EXPECT_GE(fr.gate.minCoeff(), 0.0);
      for (Eigen::Index c = 0; c < m.n_classes; ++c) {
        double lo = 1e300, hi = -1e300;
        for (const auto& e : m.experts) {
          lo = std::min(lo, e(x)(c));
          hi = std::max(hi, e(x)(c));
        }
        EXPECT_GE(fr.logits(c), lo - 1e-12);
        EXPECT_LE(fr.logits(c), hi + 1e-12);
      }
    }
  }
}

TEST(Params, FlattenAssignRoundTripAndCount) {
  for (const auto& spec : {RouterSpec{}, deep_spec({4}), quantum_spec(2, 3)}) {
    auto m = build_model(spec, 2, 2, 2);
    initialize(m, 9);
    const auto flat = flatten_params(m);
    EXPECT_EQ(flat.size(), count_parameters(m).total());
    auto copy = build_model(spec, 2, 2, 2);
    assign_params(copy, flat);
    EXPECT_EQ(flatten_params(copy), flat);
    std::vector<double> short_flat(flat.begin(), flat.end() - 1);
    EXPECT_THROW(assign_params(copy, short_flat), DimensionError);
  }
}

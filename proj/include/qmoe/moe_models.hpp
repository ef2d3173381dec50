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

// Mixture-of-experts models with interchangeable routers:
//   linear  softmax(W_g x + b_g)
//   deep    tanh MLP followed by softmax
//   quantum measurement distribution of the angle-embedding circuit
// All variants combine N linear experts as y = sum_i g_i(x) (W_i x + b_i).

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qmoe/error.hpp"
#include "qmoe/noise_sim.hpp"
#include "qmoe/quantum_core.hpp"

namespace qmoe {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LinearExpert {
  MatrixXd W;  // n_classes x d
  VectorXd b;  // n_classes

  VectorXd operator()(const VectorXd& x) const { return W * x + b; }
};

struct LinearRouter {
  MatrixXd W;  // N x d
  VectorXd b;  // N
};

struct DenseLayer {
  MatrixXd W;
  VectorXd b;
};

/// tanh between consecutive layers; the last layer has width N.
struct DeepRouter {
  std::vector<DenseLayer> layers;
};

struct QuantumRouter {
  CircuitSpec spec;
  ParamVector params;
  std::size_t n_experts = 2;
  ExpertMapping mapping = ExpertMapping::Modulo;
};

using Router = std::variant<LinearRouter, DeepRouter, QuantumRouter>;

enum class RouterKind { Linear, Deep, Quantum };

inline std::string to_string(RouterKind k) {
  switch (k) {
    case RouterKind::Linear: return "linear";
    case RouterKind::Deep: return "deep";
    case RouterKind::Quantum: return "quantum";
  }
  return "linear";
}

inline RouterKind router_kind_from_string(const std::string& s) {
  if (s == "linear") return RouterKind::Linear;
  if (s == "deep") return RouterKind::Deep;
  if (s == "quantum") return RouterKind::Quantum;
  throw std::invalid_argument("unknown router kind '" + s + "'");
}

struct HybridModel {
  Router router;
  std::vector<LinearExpert> experts;
  int d = 0;
  int n_classes = 0;

  RouterKind kind() const { return static_cast<RouterKind>(router.index()); }
  std::size_t n_experts() const { return experts.size(); }
};

/// Architecture description from which a zero-valued model is built.
struct RouterSpec {
  RouterKind kind = RouterKind::Linear;
  int n_qubits = 2;
  int n_layers = 1;
  std::vector<int> hidden{13, 13};
  ExpertMapping mapping = ExpertMapping::Modulo;
};

inline HybridModel build_model(const RouterSpec& spec, int d, int n_classes, std::size_t n_experts) {
  detail::require_dims(d >= 1 && n_classes >= 1 && n_experts >= 1, "build_model: dimensions must be positive");
  const auto N = static_cast<Eigen::Index>(n_experts);
  HybridModel m;
  m.d = d;
  m.n_classes = n_classes;
  switch (spec.kind) {
    case RouterKind::Linear:
      m.router = LinearRouter{MatrixXd::Zero(N, d), VectorXd::Zero(N)};
      break;
    case RouterKind::Deep: {
      DeepRouter r;
      int in = d;
      for (int w : spec.hidden) {
        detail::require_dims(w >= 1, "build_model: hidden widths must be positive");
        r.layers.push_back({MatrixXd::Zero(w, in), VectorXd::Zero(w)});
        in = w;
      }
      r.layers.push_back({MatrixXd::Zero(N, in), VectorXd::Zero(N)});
      m.router = std::move(r);
      break;
    }
    case RouterKind::Quantum: {
      detail::require_dims(spec.n_qubits == d, "build_model: quantum router needs one feature per qubit");
      detail::require_dims(n_experts <= (std::size_t{1} << spec.n_qubits),
                           "build_model: quantum router supports at most 2^n experts");
      auto circuit = CircuitSpec::layered(spec.n_qubits, spec.n_layers);
      ParamVector params(circuit.n_params());
      m.router = QuantumRouter{std::move(circuit), std::move(params), n_experts, spec.mapping};
      break;
    }
  }
  for (std::size_t i = 0; i < n_experts; ++i) {
    m.experts.push_back({MatrixXd::Zero(n_classes, d), VectorXd::Zero(n_classes)});
  }
  return m;
}

inline VectorXd softmax(const VectorXd& z) {
  const double mx = z.maxCoeff();
  VectorXd e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

inline VectorXd gate_linear(const LinearRouter& r, const VectorXd& x) {
  detail::require_dims(x.size() == r.W.cols(), "gate_linear: input dimension mismatch");
  return softmax(r.W * x + r.b);
}

inline VectorXd gate_deep(const DeepRouter& r, const VectorXd& x) {
  detail::require_dims(!r.layers.empty() && x.size() == r.layers.front().W.cols(), "gate_deep: input dimension mismatch");
  VectorXd h = x;
  for (std::size_t l = 0; l < r.layers.size(); ++l) {
    h = r.layers[l].W * h + r.layers[l].b;
    if (l + 1 < r.layers.size()) h = h.array().tanh().matrix();
  }
  return softmax(h);
}

inline VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline VectorXd gate_quantum(const QuantumRouter& r, const VectorXd& x) {
  detail::require_dims(x.size() == r.spec.n_qubits(), "gate_quantum: input dimension must equal qubit count");
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  const auto probs = measure_probabilities(run_circuit(r.spec, r.params, xs));
  return to_eigen(route_probabilities(probs, r.n_experts, r.mapping));
}

/// Gate of the quantum router evaluated on the noisy density-matrix simulator.
inline VectorXd gate_quantum_noisy(const QuantumRouter& r, const VectorXd& x, double eps, NoiseOptions opts = {}) {
  detail::require_dims(x.size() == r.spec.n_qubits(), "gate_quantum: input dimension must equal qubit count");
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  const auto probs = run_circuit_noisy(r.spec, r.params, xs, eps, opts);
  return to_eigen(route_probabilities(probs, r.n_experts, r.mapping));
}

inline VectorXd gate(const HybridModel& m, const VectorXd& x) {
  return std::visit(
      [&](const auto& r) -> VectorXd {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) return gate_linear(r, x);
        else if constexpr (std::is_same_v<R, DeepRouter>) return gate_deep(r, x);
        else return gate_quantum(r, x);
      },
      m.router);
}

/// Convex combination of expert outputs under gate `g`.
inline VectorXd mix_experts(const HybridModel& m, const VectorXd& x, const VectorXd& g) {
  detail::require_dims(x.size() == m.d, "forward: input dimension mismatch");
  detail::require_dims(static_cast<std::size_t>(g.size()) == m.experts.size(), "forward: gate length mismatch");
  VectorXd y = VectorXd::Zero(m.n_classes);
  for (std::size_t i = 0; i < m.experts.size(); ++i) y += g(static_cast<Eigen::Index>(i)) * m.experts[i](x);
  return y;
}

struct ForwardResult {
  VectorXd logits;
  VectorXd gate;
};

inline ForwardResult forward(const HybridModel& m, const VectorXd& x) {
  detail::require_dims(x.size() == m.d, "forward: input dimension mismatch");
  VectorXd g = gate(m, x);
  VectorXd y = mix_experts(m, x, g);
  return {std::move(y), std::move(g)};
}

struct ParamCount {
  std::size_t router = 0;
  std::size_t experts = 0;
  std::size_t total() const { return router + experts; }
};

inline ParamCount count_parameters(const HybridModel& m) {
  ParamCount c;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) {
          c.router = static_cast<std::size_t>(r.W.size() + r.b.size());
        } else if constexpr (std::is_same_v<R, DeepRouter>) {
          for (const auto& l : r.layers) c.router += static_cast<std::size_t>(l.W.size() + l.b.size());
        } else {
          c.router = r.params.size();
        }
      },
      m.router);
  for (const auto& e : m.experts) c.experts += static_cast<std::size_t>(e.W.size() + e.b.size());
  return c;
}

/// accuracy / ln(1 + P).
inline double efficiency_ratio(double accuracy, std::size_t params) {
  if (params < 1) throw std::invalid_argument("efficiency_ratio: parameter count must be >= 1");
  return accuracy / std::log1p(static_cast<double>(params));
}

/// Visits every trainable block as a contiguous span in a fixed order:
/// router blocks first, then each expert's W and b.
template <typename Model, typename F>
void for_each_param_block(Model& m, F&& f) {
  auto visit_block = [&](auto& block) { f(std::span(block.data(), static_cast<std::size_t>(block.size()))); };
  std::visit(
      [&](auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) {
          visit_block(r.W);
          visit_block(r.b);
        } else if constexpr (std::is_same_v<R, DeepRouter>) {
          for (auto& l : r.layers) {
            visit_block(l.W);
            visit_block(l.b);
          }
        } else {
          visit_block(r.params.values);
        }
      },
      m.router);
  for (auto& e : m.experts) {
    visit_block(e.W);
    visit_block(e.b);
  }
}

inline std::vector<double> flatten_params(const HybridModel& m) {
  std::vector<double> out;
  for_each_param_block(m, [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

inline void assign_params(HybridModel& m, std::span<const double> flat) {
  std::size_t pos = 0;
  for_each_param_block(m, [&](std::span<double> s) {
    detail::require_dims(pos + s.size() <= flat.size(), "assign_params: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size()),
              s.begin());
    pos += s.size();
  });
  detail::require_dims(pos == flat.size(), "assign_params: flat vector too long");
}

}  // namespace qmoe

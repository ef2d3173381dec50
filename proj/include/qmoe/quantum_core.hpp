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

// Dense statevector simulation of the routing circuit: angle embedding,
// RY/CZ variational layers, computational-basis measurement and the
// expert marginalization that turns outcome probabilities into a gate.
//
// Convention: qubit 0 is the most significant bit of a basis index.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmoe/error.hpp"

namespace qmoe {

using Amplitude = std::complex<double>;

inline constexpr int kMaxQubits = 20;

class QuantumState {
 public:
  /// |0...0> on n qubits.
  explicit QuantumState(int n_qubits) : QuantumState(n_qubits, 0) {}

  QuantumState(int n_qubits, std::size_t basis_index) : n_qubits_(check_qubits(n_qubits)) {
    amps_.assign(std::size_t{1} << n_qubits_, Amplitude{});
    detail::require_dims(basis_index < amps_.size(), "QuantumState: basis index out of range");
    amps_[basis_index] = 1.0;
  }

  /// Takes amplitudes as given; callers are responsible for normalization.
  QuantumState(int n_qubits, std::vector<Amplitude> amps)
      : n_qubits_(check_qubits(n_qubits)), amps_(std::move(amps)) {
    detail::require_dims(amps_.size() == (std::size_t{1} << n_qubits_),
                         "QuantumState: amplitude count must be 2^n");
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }

  std::span<const Amplitude> amplitudes() const { return amps_; }
  std::span<Amplitude> amplitudes() { return amps_; }
  const Amplitude& operator[](std::size_t b) const { return amps_[b]; }
  Amplitude& operator[](std::size_t b) { return amps_[b]; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
  }

 private:
  static int check_qubits(int n) {
    detail::require_dims(n >= 1 && n <= kMaxQubits, "QuantumState: qubit count must be in [1, 20]");
    return n;
  }

  int n_qubits_;
  std::vector<Amplitude> amps_;
};

enum class GateKind { AngleEmbed, RY, CZ };

/// One entry of a circuit's gate plan.
/// AngleEmbed: RY(x[index]) on `qubit`. RY: RY(theta[index]) on `qubit`.
/// CZ: controlled-Z between `qubit` and `other`.
struct GateOp {
  GateKind kind;
  int qubit = 0;
  int other = -1;
  int index = -1;

  static GateOp angle_embed(int qubit, int feature) { return {GateKind::AngleEmbed, qubit, -1, feature}; }
  static GateOp ry(int qubit, int param) { return {GateKind::RY, qubit, -1, param}; }
  static GateOp cz(int a, int b) { return {GateKind::CZ, a, b, -1}; }

  bool operator==(const GateOp&) const = default;
};

/// Strongly typed trainable rotation angles (radians).
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
  ParamVector(std::initializer_list<double> v) : values(v) {}
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  std::span<const double> span() const { return values; }
};

class CircuitSpec {
 public:
  /// Angle embedding on every qubit, then `n_layers` repetitions of
  /// RY on each qubit followed by a CZ chain over adjacent pairs.
  /// Parameter index of layer l, qubit q is l * n_qubits + q.
  static CircuitSpec layered(int n_qubits, int n_layers) {
    detail::require_dims(n_qubits >= 1 && n_qubits <= kMaxQubits, "CircuitSpec: qubit count must be in [1, 20]");
    detail::require_dims(n_layers >= 0, "CircuitSpec: layer count must be >= 0");
    std::vector<GateOp> plan;
    for (int q = 0; q < n_qubits; ++q) plan.push_back(GateOp::angle_embed(q, q));
    for (int l = 0; l < n_layers; ++l) {
      for (int q = 0; q < n_qubits; ++q) plan.push_back(GateOp::ry(q, l * n_qubits + q));
      for (int q = 0; q + 1 < n_qubits; ++q) plan.push_back(GateOp::cz(q, q + 1));
    }
    return CircuitSpec(n_qubits, n_layers, std::move(plan));
  }

  /// Validates a hand-built plan against the layout invariants.
  CircuitSpec(int n_qubits, int n_layers, std::vector<GateOp> plan)
      : n_qubits_(n_qubits), n_layers_(n_layers), plan_(std::move(plan)) {
    validate();
  }

  int n_qubits() const { return n_qubits_; }
  int n_layers() const { return n_layers_; }
  std::size_t n_params() const { return n_params_; }
  std::span<const GateOp> gate_plan() const { return plan_; }

  bool operator==(const CircuitSpec&) const = default;

 private:
  void validate() {
    detail::require_dims(n_qubits_ >= 1 && n_qubits_ <= kMaxQubits, "CircuitSpec: qubit count must be in [1, 20]");
    detail::require_dims(n_layers_ >= 0, "CircuitSpec: layer count must be >= 0");
    const std::size_t expected = static_cast<std::size_t>(n_layers_) * static_cast<std::size_t>(n_qubits_);
    std::vector<int> seen(expected, 0);
    std::size_t ry_count = 0;
    for (const auto& g : plan_) {
      detail::require_dims(g.qubit >= 0 && g.qubit < n_qubits_, "CircuitSpec: gate qubit out of range");
      switch (g.kind) {
        case GateKind::AngleEmbed:
          detail::require_dims(g.index >= 0 && g.index < n_qubits_, "CircuitSpec: feature index out of range");
          break;
        case GateKind::RY:
          detail::require_dims(g.index >= 0 && static_cast<std::size_t>(g.index) < expected,
                               "CircuitSpec: parameter index out of range");
          ++seen[static_cast<std::size_t>(g.index)];
          ++ry_count;
          break;
        case GateKind::CZ:
          detail::require_dims(g.other >= 0 && g.other < n_qubits_ && std::abs(g.qubit - g.other) == 1,
                               "CircuitSpec: CZ must connect adjacent qubits");
          break;
      }
    }
    detail::require_dims(ry_count == expected, "CircuitSpec: parameter count must equal n_layers * n_qubits");
    for (int c : seen) detail::require_dims(c == 1, "CircuitSpec: every parameter index must appear exactly once");
    n_params_ = expected;
  }

  int n_qubits_;
  int n_layers_;
  std::vector<GateOp> plan_;
  std::size_t n_params_ = 0;
};

/// Counts work done by the simulators; pass a pointer to instrument a run.
struct GateTally {
  std::size_t circuit_runs = 0;
  std::size_t gate_applications = 0;
};

namespace detail {

inline std::size_t qubit_stride(int n_qubits, int qubit) {
  return std::size_t{1} << (n_qubits - 1 - qubit);
}

/// Applies the real 2x2 matrix [[m00, m01], [m10, m11]] to one qubit.
inline void apply_real_1q(std::span<Amplitude> amps, int n_qubits, int qubit, double m00, double m01, double m10,
                          double m11) {
  const std::size_t stride = qubit_stride(n_qubits, qubit);
  const std::size_t dim = amps.size();
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t off = 0; off < stride; ++off) {
      const std::size_t i0 = base + off;
      const std::size_t i1 = i0 + stride;
      const Amplitude a0 = amps[i0];
      const Amplitude a1 = amps[i1];
      amps[i0] = m00 * a0 + m01 * a1;
      amps[i1] = m10 * a0 + m11 * a1;
    }
  }
}

inline void apply_ry_inplace(std::span<Amplitude> amps, int n_qubits, int qubit, double theta) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  apply_real_1q(amps, n_qubits, qubit, c, -s, s, c);
}

/// d/dtheta of RY(theta), applied as a (non-unitary) linear map.
inline void apply_ry_derivative_inplace(std::span<Amplitude> amps, int n_qubits, int qubit, double theta) {
  const double c = 0.5 * std::cos(theta / 2.0);
  const double s = 0.5 * std::sin(theta / 2.0);
  apply_real_1q(amps, n_qubits, qubit, -s, -c, c, -s);
}

inline void apply_cz_inplace(std::span<Amplitude> amps, int n_qubits, int qa, int qb) {
  const std::size_t mask = qubit_stride(n_qubits, qa) | qubit_stride(n_qubits, qb);
  for (std::size_t b = 0; b < amps.size(); ++b) {
    if ((b & mask) == mask) amps[b] = -amps[b];
  }
}

inline void check_qubit(const QuantumState& s, int q, const char* what) {
  require_dims(q >= 0 && q < s.n_qubits(), std::string(what) + ": qubit index out of range");
}

/// Angle for gate `g`: a feature value for embeddings, a parameter for RY.
inline double gate_angle(const GateOp& g, std::span<const double> params, std::span<const double> x) {
  return g.kind == GateKind::AngleEmbed ? x[static_cast<std::size_t>(g.index)]
                                        : params[static_cast<std::size_t>(g.index)];
}

inline void apply_gate_inplace(std::span<Amplitude> amps, int n_qubits, const GateOp& g,
                               std::span<const double> params, std::span<const double> x) {
  if (g.kind == GateKind::CZ) {
    apply_cz_inplace(amps, n_qubits, g.qubit, g.other);
  } else {
    apply_ry_inplace(amps, n_qubits, g.qubit, gate_angle(g, params, x));
  }
}

/// Inverse of apply_gate_inplace (RY(-angle); CZ is self-inverse).
inline void unapply_gate_inplace(std::span<Amplitude> amps, int n_qubits, const GateOp& g,
                                 std::span<const double> params, std::span<const double> x) {
  if (g.kind == GateKind::CZ) {
    apply_cz_inplace(amps, n_qubits, g.qubit, g.other);
  } else {
    apply_ry_inplace(amps, n_qubits, g.qubit, -gate_angle(g, params, x));
  }
}

inline void check_circuit_inputs(const CircuitSpec& spec, const ParamVector& params, std::span<const double> x) {
  require_dims(params.size() == spec.n_params(), "run_circuit: parameter vector length must equal n_layers * n_qubits");
  require_dims(x.size() == static_cast<std::size_t>(spec.n_qubits()),
               "run_circuit: feature vector length must equal qubit count");
}

}  // namespace detail

/// Product state ⊗_i (cos(x_i/2)|0> + sin(x_i/2)|1>).
inline QuantumState angle_embed(std::span<const double> x, int n_qubits) {
  detail::require_dims(x.size() == static_cast<std::size_t>(n_qubits),
                       "angle_embed: feature vector length must equal qubit count");
  QuantumState state(n_qubits);
  const std::size_t dim = state.dim();
  for (std::size_t b = 0; b < dim; ++b) {
    double amp = 1.0;
    for (int q = 0; q < n_qubits; ++q) {
      const double half = x[static_cast<std::size_t>(q)] / 2.0;
      amp *= (b & detail::qubit_stride(n_qubits, q)) ? std::sin(half) : std::cos(half);
    }
    state[b] = amp;
  }
  return state;
}

inline QuantumState apply_ry(QuantumState state, int qubit, double theta) {
  detail::check_qubit(state, qubit, "apply_ry");
  detail::apply_ry_inplace(state.amplitudes(), state.n_qubits(), qubit, theta);
  return state;
}

inline QuantumState apply_cz(QuantumState state, int qa, int qb) {
  detail::check_qubit(state, qa, "apply_cz");
  detail::check_qubit(state, qb, "apply_cz");
  detail::require_dims(qa != qb, "apply_cz: control and target must differ");
  detail::apply_cz_inplace(state.amplitudes(), state.n_qubits(), qa, qb);
  return state;
}

/// Executes the gate plan from |0...0>, returning U(theta)|psi(x)>.
inline QuantumState run_circuit(const CircuitSpec& spec, const ParamVector& params, std::span<const double> x,
                                GateTally* tally = nullptr) {
  detail::check_circuit_inputs(spec, params, x);
  QuantumState state(spec.n_qubits());
  for (const auto& g : spec.gate_plan()) {
    detail::apply_gate_inplace(state.amplitudes(), spec.n_qubits(), g, params.span(), x);
  }
  if (tally) {
    ++tally->circuit_runs;
    tally->gate_applications += spec.gate_plan().size();
  }
  return state;
}

inline std::vector<double> measure_probabilities(const QuantumState& state) {
  std::vector<double> p(state.dim());
  for (std::size_t b = 0; b < state.dim(); ++b) p[b] = std::norm(state[b]);
  return p;
}

/// How 2^n measurement outcomes are grouped into N experts.
enum class ExpertMapping {
  Modulo,         ///< outcome b -> expert b mod N
  FirstKQubits,   ///< outcome b -> leading log2(N) bits of b; N must be a power of two
};

inline std::string to_string(ExpertMapping m) {
  return m == ExpertMapping::Modulo ? "modulo" : "marginal-first-k-qubits";
}

inline ExpertMapping expert_mapping_from_string(const std::string& s) {
  if (s == "modulo") return ExpertMapping::Modulo;
  if (s == "marginal-first-k-qubits") return ExpertMapping::FirstKQubits;
  throw std::invalid_argument("unknown expert mapping '" + s + "'");
}

namespace detail {

inline int log2_exact(std::size_t n) {
  int k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return (std::size_t{1} << k) == n ? k : -1;
}

}  // namespace detail

/// Expert index for each of the 2^n outcomes.
inline std::vector<std::size_t> expert_assignment(std::size_t n_outcomes, std::size_t n_experts,
                                                  ExpertMapping mapping) {
  detail::require_dims(n_experts >= 1 && n_experts <= n_outcomes,
                       "route_probabilities: expert count must be in [1, 2^n]");
  const int n_qubits = detail::log2_exact(n_outcomes);
  detail::require_dims(n_qubits >= 0, "route_probabilities: outcome count must be a power of two");
  std::vector<std::size_t> out(n_outcomes);
  if (mapping == ExpertMapping::Modulo) {
    for (std::size_t b = 0; b < n_outcomes; ++b) out[b] = b % n_experts;
  } else {
    const int k = detail::log2_exact(n_experts);
    detail::require_dims(k >= 0, "route_probabilities: marginal-first-k-qubits needs a power-of-two expert count");
    for (std::size_t b = 0; b < n_outcomes; ++b) out[b] = b >> (n_qubits - k);
  }
  return out;
}

inline std::vector<double> route_probabilities(std::span<const double> probs, std::size_t n_experts,
                                               ExpertMapping mapping = ExpertMapping::Modulo) {
  const auto assign = expert_assignment(probs.size(), n_experts, mapping);
  std::vector<double> g(n_experts, 0.0);
  for (std::size_t b = 0; b < probs.size(); ++b) g[assign[b]] += probs[b];
  double total = 0.0;
  for (double v : g) total += v;
  if (total > 0.0) {
    for (double& v : g) v /= total;
  }
  return g;
}

/// |a1 e^{i phi1} + a2 e^{i phi2}|^2, evaluated with complex arithmetic.
inline double interfere_two_paths(double a1, double phi1, double a2, double phi2) {
  const Amplitude total = std::polar(a1, phi1) + std::polar(a2, phi2);
  return std::norm(total);
}

/// |<psi(x)|psi(x')>|^2 over the embedding alone.
inline double quantum_kernel(int n_qubits, std::span<const double> x, std::span<const double> x_prime) {
  const auto a = angle_embed(x, n_qubits);
  const auto b = angle_embed(x_prime, n_qubits);
  Amplitude overlap{};
  for (std::size_t i = 0; i < a.dim(); ++i) overlap += std::conj(a[i]) * b[i];
  return std::norm(overlap);
}

inline double quantum_kernel(const CircuitSpec& spec, std::span<const double> x, std::span<const double> x_prime) {
  return quantum_kernel(spec.n_qubits(), x, x_prime);
}

}  // namespace qmoe

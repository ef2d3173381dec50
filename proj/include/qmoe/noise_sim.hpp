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

// Density-matrix evaluation of the routing circuit under per-gate
// depolarizing noise. Inference only; training uses the pure-state path.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "qmoe/quantum_core.hpp"

namespace qmoe {

inline constexpr int kMaxDensityQubits = 12;

class DensityMatrix {
 public:
  explicit DensityMatrix(int n_qubits)
      : n_qubits_(n_qubits), rho_(Eigen::MatrixXcd::Zero(dim_of(n_qubits), dim_of(n_qubits))) {
    rho_(0, 0) = 1.0;
  }

  DensityMatrix(int n_qubits, Eigen::MatrixXcd entries) : n_qubits_(n_qubits), rho_(std::move(entries)) {
    detail::require_dims(rho_.rows() == dim_of(n_qubits) && rho_.cols() == rho_.rows(),
                         "DensityMatrix: entries must be 2^n x 2^n");
  }

  int n_qubits() const { return n_qubits_; }
  Eigen::Index dim() const { return rho_.rows(); }
  const Eigen::MatrixXcd& entries() const { return rho_; }
  Eigen::MatrixXcd& entries() { return rho_; }

  Amplitude trace() const { return rho_.trace(); }
  double purity() const { return (rho_ * rho_).trace().real(); }

  std::vector<double> diagonal_probabilities() const {
    std::vector<double> p(static_cast<std::size_t>(dim()));
    for (Eigen::Index i = 0; i < dim(); ++i) p[static_cast<std::size_t>(i)] = rho_(i, i).real();
    return p;
  }

 private:
  static Eigen::Index dim_of(int n) {
    detail::require_dims(n >= 1 && n <= kMaxDensityQubits, "DensityMatrix: qubit count must be in [1, 12]");
    return Eigen::Index{1} << n;
  }

  int n_qubits_;
  Eigen::MatrixXcd rho_;
};

inline DensityMatrix to_density(const QuantumState& state) {
  Eigen::Map<const Eigen::VectorXcd> psi(state.amplitudes().data(), static_cast<Eigen::Index>(state.dim()));
  return DensityMatrix(state.n_qubits(), psi * psi.adjoint());
}

/// A concrete unitary to conjugate a density matrix with.
struct UnitaryGate {
  enum class Kind { Identity, RY, CZ };
  Kind kind = Kind::Identity;
  int qubit = 0;
  int other = -1;
  double angle = 0.0;

  static UnitaryGate identity(int qubit) { return {Kind::Identity, qubit, -1, 0.0}; }
  static UnitaryGate ry(int qubit, double angle) { return {Kind::RY, qubit, -1, angle}; }
  static UnitaryGate cz(int a, int b) { return {Kind::CZ, a, b, 0.0}; }
};

namespace detail {

inline Eigen::Index dm_stride(int n_qubits, int qubit) {
  return static_cast<Eigen::Index>(qubit_stride(n_qubits, qubit));
}

/// rho -> M rho M^T for a real 2x2 M acting on `qubit`.
inline void conjugate_real_1q(Eigen::MatrixXcd& rho, int n_qubits, int qubit, double m00, double m01, double m10,
                              double m11) {
  const Eigen::Index s = dm_stride(n_qubits, qubit);
  const Eigen::Index dim = rho.rows();
  for (Eigen::Index base = 0; base < dim; base += 2 * s) {
    for (Eigen::Index off = 0; off < s; ++off) {
      const Eigen::Index i0 = base + off;
      const Eigen::Index i1 = i0 + s;
      // Left multiplication mixes rows i0, i1.
      for (Eigen::Index c = 0; c < dim; ++c) {
        const Amplitude a0 = rho(i0, c);
        const Amplitude a1 = rho(i1, c);
        rho(i0, c) = m00 * a0 + m01 * a1;
        rho(i1, c) = m10 * a0 + m11 * a1;
      }
    }
  }
  for (Eigen::Index base = 0; base < dim; base += 2 * s) {
    for (Eigen::Index off = 0; off < s; ++off) {
      const Eigen::Index j0 = base + off;
      const Eigen::Index j1 = j0 + s;
      // Right multiplication by M^T mixes columns j0, j1.
      for (Eigen::Index r = 0; r < dim; ++r) {
        const Amplitude a0 = rho(r, j0);
        const Amplitude a1 = rho(r, j1);
        rho(r, j0) = m00 * a0 + m01 * a1;
        rho(r, j1) = m10 * a0 + m11 * a1;
      }
    }
  }
}

inline void conjugate_cz(Eigen::MatrixXcd& rho, int n_qubits, int qa, int qb) {
  const auto mask = static_cast<Eigen::Index>(qubit_stride(n_qubits, qa) | qubit_stride(n_qubits, qb));
  const Eigen::Index dim = rho.rows();
  for (Eigen::Index c = 0; c < dim; ++c) {
    const bool col_flip = (c & mask) == mask;
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (col_flip != ((r & mask) == mask)) rho(r, c) = -rho(r, c);
    }
  }
}

inline void check_epsilon(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("depolarizing rate must lie in [0, 1]");
}

}  // namespace detail

/// Single-qubit depolarizing channel (1-e) rho + (e/3)(X rho X + Y rho Y + Z rho Z),
/// applied in its block form: populations relax toward each other by 2e/3
/// and coherences shrink by (1 - 4e/3).
inline void depolarize(DensityMatrix& rho, int qubit, double eps) {
  detail::check_epsilon(eps);
  detail::require_dims(qubit >= 0 && qubit < rho.n_qubits(), "depolarize: qubit index out of range");
  auto& m = rho.entries();
  const Eigen::Index s = detail::dm_stride(rho.n_qubits(), qubit);
  const Eigen::Index dim = m.rows();
  const double keep = 1.0 - 2.0 * eps / 3.0;
  const double swap = 2.0 * eps / 3.0;
  const double shrink = 1.0 - 4.0 * eps / 3.0;
  for (Eigen::Index r = 0; r < dim; ++r) {
    if (r & s) continue;
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (c & s) continue;
      const Amplitude p00 = m(r, c);
      const Amplitude p11 = m(r + s, c + s);
      m(r, c) = keep * p00 + swap * p11;
      m(r + s, c + s) = keep * p11 + swap * p00;
      m(r, c + s) *= shrink;
      m(r + s, c) *= shrink;
    }
  }
}

/// U rho U^dagger, then a depolarizing channel on every qubit the gate touches.
inline DensityMatrix apply_gate_noisy(DensityMatrix rho, const UnitaryGate& gate, double eps) {
  detail::check_epsilon(eps);
  const int n = rho.n_qubits();
  detail::require_dims(gate.qubit >= 0 && gate.qubit < n, "apply_gate_noisy: qubit index out of range");
  switch (gate.kind) {
    case UnitaryGate::Kind::Identity:
      break;
    case UnitaryGate::Kind::RY: {
      const double c = std::cos(gate.angle / 2.0);
      const double s = std::sin(gate.angle / 2.0);
      detail::conjugate_real_1q(rho.entries(), n, gate.qubit, c, -s, s, c);
      break;
    }
    case UnitaryGate::Kind::CZ:
      detail::require_dims(gate.other >= 0 && gate.other < n && gate.other != gate.qubit,
                           "apply_gate_noisy: CZ qubits must be distinct and in range");
      detail::conjugate_cz(rho.entries(), n, gate.qubit, gate.other);
      break;
  }
  if (eps > 0.0) {
    depolarize(rho, gate.qubit, eps);
    if (gate.kind == UnitaryGate::Kind::CZ) depolarize(rho, gate.other, eps);
  }
  return rho;
}

struct NoiseOptions {
  bool noisy_embedding = false;  ///< also depolarize after embedding rotations
};

inline DensityMatrix run_circuit_noisy_density(const CircuitSpec& spec, const ParamVector& params,
                                               std::span<const double> x, double eps, NoiseOptions opts = {}) {
  detail::check_epsilon(eps);
  detail::check_circuit_inputs(spec, params, x);
  DensityMatrix rho(spec.n_qubits());
  for (const auto& g : spec.gate_plan()) {
    switch (g.kind) {
      case GateKind::AngleEmbed:
        rho = apply_gate_noisy(std::move(rho), UnitaryGate::ry(g.qubit, x[static_cast<std::size_t>(g.index)]),
                               opts.noisy_embedding ? eps : 0.0);
        break;
      case GateKind::RY:
        rho = apply_gate_noisy(std::move(rho), UnitaryGate::ry(g.qubit, params[static_cast<std::size_t>(g.index)]),
                               eps);
        break;
      case GateKind::CZ:
        rho = apply_gate_noisy(std::move(rho), UnitaryGate::cz(g.qubit, g.other), eps);
        break;
    }
  }
  return rho;
}

/// Computational-basis probabilities of the noisy circuit's final state.
inline std::vector<double> run_circuit_noisy(const CircuitSpec& spec, const ParamVector& params,
                                             std::span<const double> x, double eps, NoiseOptions opts = {}) {
  auto p = run_circuit_noisy_density(spec, params, x, eps, opts).diagonal_probabilities();
  double total = 0.0;
  for (double& v : p) {
    v = std::max(v, 0.0);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace qmoe

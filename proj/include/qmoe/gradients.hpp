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

// Derivatives of measurement probabilities with respect to circuit angles.
//
// Three interchangeable backends share one interface:
//   adjoint          one forward run, one reverse sweep (training default)
//   parameter shift  2P forward runs, exact for RY-generated circuits
//   finite diff      central differences, test oracle only

#pragma once

#include <Eigen/Core>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmoe/quantum_core.hpp"

namespace qmoe {

/// Entry (k, j) is d p_k / d theta_j.
using ProbJacobian = Eigen::MatrixXd;

enum class GradientBackend { Adjoint, ParameterShift, FiniteDiff };

inline constexpr double kDefaultFiniteDiffStep = 1e-5;

inline std::string to_string(GradientBackend b) {
  switch (b) {
    case GradientBackend::Adjoint: return "adjoint";
    case GradientBackend::ParameterShift: return "parameter_shift";
    case GradientBackend::FiniteDiff: return "finite_diff";
  }
  return "adjoint";
}

inline GradientBackend gradient_backend_from_string(const std::string& s) {
  if (s == "adjoint") return GradientBackend::Adjoint;
  if (s == "parameter_shift") return GradientBackend::ParameterShift;
  if (s == "finite_diff") return GradientBackend::FiniteDiff;
  throw std::invalid_argument("unknown gradient backend '" + s + "'");
}

namespace detail {

inline double real_inner(std::span<const Amplitude> a, std::span<const Amplitude> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (std::conj(a[i]) * b[i]).real();
  return s;
}

/// Reverse sweep shared by the Jacobian and the vector-Jacobian product.
/// `bras` holds `n_bras` vectors of length dim back to back, each already
/// equal to Pi psi for its projector Pi; `visit(j, bra_index, value)` is called
/// with value = 2 Re <bra| dG_j |phi_before_j>.
template <typename Visit>
void adjoint_sweep(const CircuitSpec& spec, const ParamVector& params, std::span<const double> x,
                   QuantumState phi, std::vector<Amplitude>& bras, std::size_t n_bras, Visit&& visit,
                   GateTally* tally) {
  const int n = spec.n_qubits();
  const std::size_t dim = phi.dim();
  std::vector<Amplitude> mu(dim);
  const auto plan = spec.gate_plan();
  for (auto it = plan.rbegin(); it != plan.rend(); ++it) {
    const GateOp& g = *it;
    unapply_gate_inplace(phi.amplitudes(), n, g, params.span(), x);
    if (tally) ++tally->gate_applications;
    if (g.kind == GateKind::RY) {
      std::copy(phi.amplitudes().begin(), phi.amplitudes().end(), mu.begin());
      apply_ry_derivative_inplace(mu, n, g.qubit, params[static_cast<std::size_t>(g.index)]);
      for (std::size_t k = 0; k < n_bras; ++k) {
        std::span<const Amplitude> bra(bras.data() + k * dim, dim);
        visit(static_cast<std::size_t>(g.index), k, 2.0 * real_inner(bra, mu));
      }
    }
    for (std::size_t k = 0; k < n_bras; ++k) {
      unapply_gate_inplace(std::span<Amplitude>(bras.data() + k * dim, dim), n, g, params.span(), x);
      if (tally) ++tally->gate_applications;
    }
  }
}

}  // namespace detail

/// Full probability Jacobian by a single forward run and one reverse sweep
/// carrying one bra per computational-basis projector.
inline ProbJacobian jacobian_adjoint(const CircuitSpec& spec, const ParamVector& params, std::span<const double> x,
                                     GateTally* tally = nullptr) {
  QuantumState psi = run_circuit(spec, params, x, tally);
  const std::size_t dim = psi.dim();
  std::vector<Amplitude> bras(dim * dim, Amplitude{});
  for (std::size_t k = 0; k < dim; ++k) bras[k * dim + k] = psi[k];
  ProbJacobian jac = ProbJacobian::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(spec.n_params()));
  detail::adjoint_sweep(
      spec, params, x, std::move(psi), bras, dim,
      [&](std::size_t j, std::size_t k, double v) {
        jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
      },
      tally);
  return jac;
}

inline ProbJacobian jacobian_parameter_shift(const CircuitSpec& spec, const ParamVector& params,
                                             std::span<const double> x, GateTally* tally = nullptr) {
  detail::check_circuit_inputs(spec, params, x);
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << spec.n_qubits());
  ProbJacobian jac(dim, static_cast<Eigen::Index>(spec.n_params()));
  constexpr double shift = std::numbers::pi / 2.0;
  ParamVector shifted = params;
  for (std::size_t j = 0; j < params.size(); ++j) {
    shifted[j] = params[j] + shift;
    const auto plus = measure_probabilities(run_circuit(spec, shifted, x, tally));
    shifted[j] = params[j] - shift;
    const auto minus = measure_probabilities(run_circuit(spec, shifted, x, tally));
    shifted[j] = params[j];
    for (Eigen::Index k = 0; k < dim; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      jac(k, static_cast<Eigen::Index>(j)) = 0.5 * (plus[kk] - minus[kk]);
    }
  }
  return jac;
}

inline ProbJacobian jacobian_finite_diff(const CircuitSpec& spec, const ParamVector& params, std::span<const double> x,
                                         double step = kDefaultFiniteDiffStep, GateTally* tally = nullptr) {
  if (!(step > 0.0)) throw std::invalid_argument("jacobian_finite_diff: step must be positive");
  detail::check_circuit_inputs(spec, params, x);
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << spec.n_qubits());
  ProbJacobian jac(dim, static_cast<Eigen::Index>(spec.n_params()));
  ParamVector shifted = params;
  for (std::size_t j = 0; j < params.size(); ++j) {
    shifted[j] = params[j] + step;
    const auto plus = measure_probabilities(run_circuit(spec, shifted, x, tally));
    shifted[j] = params[j] - step;
    const auto minus = measure_probabilities(run_circuit(spec, shifted, x, tally));
    shifted[j] = params[j];
    for (Eigen::Index k = 0; k < dim; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      jac(k, static_cast<Eigen::Index>(j)) = (plus[kk] - minus[kk]) / (2.0 * step);
    }
  }
  return jac;
}

inline ProbJacobian jacobian(GradientBackend backend, const CircuitSpec& spec, const ParamVector& params,
                             std::span<const double> x, GateTally* tally = nullptr) {
  switch (backend) {
    case GradientBackend::Adjoint: return jacobian_adjoint(spec, params, x, tally);
    case GradientBackend::ParameterShift: return jacobian_parameter_shift(spec, params, x, tally);
    case GradientBackend::FiniteDiff: return jacobian_finite_diff(spec, params, x, kDefaultFiniteDiffStep, tally);
  }
  return jacobian_adjoint(spec, params, x, tally);
}

struct ProbabilityVjp {
  std::vector<double> probs;      ///< p_k at the evaluation point
  std::vector<double> gradient;   ///< sum_k w_k d p_k / d theta_j
};

/// Vector-Jacobian product sum_k w_k dp_k/dtheta. The adjoint path folds the
/// weights into a single bra W psi, so the sweep costs one state per gate
/// regardless of the number of outcomes.
inline ProbabilityVjp probability_vjp(GradientBackend backend, const CircuitSpec& spec, const ParamVector& params,
                                      std::span<const double> x, std::span<const double> weights,
                                      GateTally* tally = nullptr) {
  ProbabilityVjp out;
  if (backend != GradientBackend::Adjoint) {
    out.probs = measure_probabilities(run_circuit(spec, params, x));
    detail::require_dims(weights.size() == out.probs.size(), "probability_vjp: weight length must be 2^n");
    const ProbJacobian jac = jacobian(backend, spec, params, x, tally);
    Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
    const Eigen::VectorXd g = jac.transpose() * w;
    out.gradient.assign(g.data(), g.data() + g.size());
    return out;
  }
  QuantumState psi = run_circuit(spec, params, x, tally);
  const std::size_t dim = psi.dim();
  detail::require_dims(weights.size() == dim, "probability_vjp: weight length must be 2^n");
  out.probs = measure_probabilities(psi);
  std::vector<Amplitude> bra(dim);
  for (std::size_t k = 0; k < dim; ++k) bra[k] = weights[k] * psi[k];
  out.gradient.assign(spec.n_params(), 0.0);
  detail::adjoint_sweep(
      spec, params, x, std::move(psi), bra, 1, [&](std::size_t j, std::size_t, double v) { out.gradient[j] = v; },
      tally);
  return out;
}

}  // namespace qmoe

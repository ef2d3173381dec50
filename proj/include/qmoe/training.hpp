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

// Softmax cross-entropy training of the hybrid models: exact backprop
// through the expert mixture, quantum-router gradients via the gradients
// backends, Adam, mini-batching and early stopping on validation loss.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qmoe/datasets.hpp"
#include "qmoe/error.hpp"
#include "qmoe/gradients.hpp"
#include "qmoe/moe_models.hpp"
#include "qmoe/random.hpp"

namespace qmoe {

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 32;
  int max_epochs = 100;
  int early_stop_patience = 10;
  double min_delta = 1e-4;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  GradientBackend gradient_backend = GradientBackend::Adjoint;
  bool initialize = true;          ///< draw fresh parameters from `seed` before training
  bool record_wall_time = false;   ///< wall_ms is 0 unless set, keeping traces bitwise reproducible
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (c.max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (c.early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in (0, 1)");
  }
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double wall_ms = 0.0;
  std::vector<double> utilization;  ///< mean gate per expert over the training rows
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Initialization

inline void initialize(HybridModel& m, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::Init);
  auto glorot = [&](MatrixXd& W) {
    const double a = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = u(rng);
  };
  std::visit(
      [&](auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) {
          glorot(r.W);
          r.b.setZero();
        } else if constexpr (std::is_same_v<R, DeepRouter>) {
          for (auto& l : r.layers) {
            glorot(l.W);
            l.b.setZero();
          }
        } else {
          std::uniform_real_distribution<double> u(-0.1, 0.1);
          for (double& t : r.params.values) t = u(rng);
        }
      },
      m.router);
  for (auto& e : m.experts) {
    glorot(e.W);
    e.b.setZero();
  }
}

// ---------------------------------------------------------------------------
// Loss and gradient

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  ///< aligned with flatten_params(model)
};

namespace detail {

inline double cross_entropy(const VectorXd& logits, int label) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits(label);
}

inline void zero_like(HybridModel& m) {
  for_each_param_block(m, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
}

/// Accumulates d(loss)/d(router params) into `acc` given dL/dg at input x.
inline void router_backward(const HybridModel& m, HybridModel& acc, const VectorXd& x, const VectorXd& g,
                            const VectorXd& dg, GradientBackend backend) {
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) {
          auto& ra = std::get<LinearRouter>(acc.router);
          const VectorXd dz = g.cwiseProduct(dg - VectorXd::Constant(g.size(), g.dot(dg)));
          ra.W += dz * x.transpose();
          ra.b += dz;
        } else if constexpr (std::is_same_v<R, DeepRouter>) {
          auto& ra = std::get<DeepRouter>(acc.router);
          const std::size_t L = r.layers.size();
          std::vector<VectorXd> inputs(L);
          VectorXd h = x;
          for (std::size_t l = 0; l < L; ++l) {
            inputs[l] = h;
            h = r.layers[l].W * h + r.layers[l].b;
            if (l + 1 < L) h = h.array().tanh().matrix();
          }
          VectorXd delta = g.cwiseProduct(dg - VectorXd::Constant(g.size(), g.dot(dg)));
          for (std::size_t l = L; l-- > 0;) {
            ra.layers[l].W += delta * inputs[l].transpose();
            ra.layers[l].b += delta;
            if (l == 0) break;
            // inputs[l] = tanh(pre-activation of layer l-1)
            const VectorXd back = r.layers[l].W.transpose() * delta;
            delta = back.cwiseProduct((1.0 - inputs[l].array().square()).matrix());
          }
        } else {
          auto& ra = std::get<QuantumRouter>(acc.router);
          const auto assign = expert_assignment(std::size_t{1} << r.spec.n_qubits(), r.n_experts, r.mapping);
          std::vector<double> weights(assign.size());
          for (std::size_t b = 0; b < assign.size(); ++b) weights[b] = dg(static_cast<Eigen::Index>(assign[b]));
          const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
          const auto vjp = probability_vjp(backend, r.spec, r.params, xs, weights);
          for (std::size_t j = 0; j < vjp.gradient.size(); ++j) ra.params[j] += vjp.gradient[j];
        }
      },
      m.router);
}

}  // namespace detail

/// Mean softmax cross-entropy over the rows of `X` and its exact gradient.
inline LossGrad loss_and_grad(const HybridModel& m, const MatrixXd& X, std::span<const int> labels,
                              GradientBackend backend = GradientBackend::Adjoint) {
  if (X.rows() == 0 || labels.empty()) throw DataError("loss_and_grad: empty batch");
  detail::require_dims(static_cast<std::size_t>(X.rows()) == labels.size(), "loss_and_grad: batch row mismatch");
  HybridModel acc = m;
  detail::zero_like(acc);
  double loss = 0.0;
  const std::size_t N = m.experts.size();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= m.n_classes) throw DataError("loss_and_grad: label out of range");
    const VectorXd x = X.row(i).transpose();
    const VectorXd g = gate(m, x);
    std::vector<VectorXd> outs(N);
    VectorXd y = VectorXd::Zero(m.n_classes);
    for (std::size_t e = 0; e < N; ++e) {
      outs[e] = m.experts[e](x);
      y += g(static_cast<Eigen::Index>(e)) * outs[e];
    }
    loss += detail::cross_entropy(y, label);
    VectorXd dy = softmax(y);
    dy(label) -= 1.0;
    VectorXd dg(static_cast<Eigen::Index>(N));
    for (std::size_t e = 0; e < N; ++e) {
      const double ge = g(static_cast<Eigen::Index>(e));
      acc.experts[e].W += ge * dy * x.transpose();
      acc.experts[e].b += ge * dy;
      dg(static_cast<Eigen::Index>(e)) = dy.dot(outs[e]);
    }
    detail::router_backward(m, acc, x, g, dg, backend);
  }
  const double inv = 1.0 / static_cast<double>(X.rows());
  LossGrad out;
  out.loss = loss * inv;
  out.grad = flatten_params(acc);
  for (double& v : out.grad) v *= inv;
  return out;
}

inline double mean_loss(const HybridModel& m, const MatrixXd& X, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    loss += detail::cross_entropy(forward(m, X.row(i).transpose()).logits, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(X.rows());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update at step t >= 1. Returns the number of scalars
/// the step wrote.
inline std::size_t adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& mom, long t,
                             double lr, const AdamHyper& h = {}) {
  detail::require_dims(params.size() == grads.size() && mom.m.size() == params.size() && mom.v.size() == params.size(),
                       "adam_step: shape mismatch");
  if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    mom.m[i] = h.beta1 * mom.m[i] + (1.0 - h.beta1) * grads[i];
    mom.v[i] = h.beta2 * mom.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = mom.m[i] / c1;
    const double v_hat = mom.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
  return params.size();
}

// ---------------------------------------------------------------------------
// Evaluation

inline int predict(const HybridModel& m, const VectorXd& x) {
  Eigen::Index arg = 0;
  forward(m, x).logits.maxCoeff(&arg);
  return static_cast<int>(arg);
}

inline std::vector<int> predict_all(const HybridModel& m, const MatrixXd& X) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(predict(m, X.row(i).transpose()));
  return out;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> utilization;
};

inline Evaluation evaluate(const HybridModel& m, const MatrixXd& X, std::span<const int> labels) {
  Evaluation ev;
  ev.utilization.assign(m.experts.size(), 0.0);
  if (X.rows() == 0) return ev;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto fr = forward(m, X.row(i).transpose());
    const int label = labels[static_cast<std::size_t>(i)];
    ev.loss += detail::cross_entropy(fr.logits, label);
    Eigen::Index arg = 0;
    fr.logits.maxCoeff(&arg);
    if (arg == label) ++correct;
    for (std::size_t e = 0; e < ev.utilization.size(); ++e) ev.utilization[e] += fr.gate(static_cast<Eigen::Index>(e));
  }
  const double n = static_cast<double>(X.rows());
  ev.loss /= n;
  ev.accuracy = static_cast<double>(correct) / n;
  for (double& u : ev.utilization) u /= n;
  return ev;
}

// ---------------------------------------------------------------------------
// Fit

struct FitResult {
  HybridModel model;
  TrainTrace trace;
};

/// Trains on every row of `data` (split tags are ignored): a seeded
/// validation_fraction of the rows is held out for early stopping, and the
/// snapshot with the lowest validation loss is returned. When the hold-out
/// rounds to zero rows, the training loss drives early stopping.
inline FitResult fit(HybridModel model, const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  validate(data);
  if (cfg.initialize) initialize(model, cfg.seed);
  FitResult result{model, {}};
  if (cfg.max_epochs == 0) return result;

  if (std::adjacent_find(data.labels.begin(), data.labels.end(), std::not_equal_to<>()) == data.labels.end()) {
    throw DataError("fit: training data contains a single class");
  }

  Rng vrng = make_rng(cfg.seed, Stream::Validation);
  const auto order = permutation(data.rows(), vrng);
  const auto n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.rows()));
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  if (train_rows.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw DataError("fit: " + std::to_string(train_rows.size()) + " training rows after the validation split, batch_size " +
                    std::to_string(cfg.batch_size) + " requested");
  }
  const Dataset train = select_rows(data, train_rows);
  const Dataset val = n_val > 0 ? select_rows(data, val_rows) : train;

  std::vector<double> params = flatten_params(model);
  AdamMoments moments(params.size());
  Rng shuffle = make_rng(cfg.seed, Stream::Shuffle);
  long step = 0;
  int since_best = 0;
  std::vector<double> best_params = params;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto perm = permutation(train.rows(), shuffle);
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
      MatrixXd Xb(static_cast<Eigen::Index>(stop - start), train.X.cols());
      std::vector<int> yb;
      for (std::size_t k = start; k < stop; ++k) {
        Xb.row(static_cast<Eigen::Index>(k - start)) = train.X.row(static_cast<Eigen::Index>(perm[k]));
        yb.push_back(train.labels[perm[k]]);
      }
      const LossGrad lg = loss_and_grad(model, Xb, yb, cfg.gradient_backend);
      adam_step(params, lg.grad, moments, ++step, cfg.learning_rate);
      assign_params(model, params);
    }
    const Evaluation tr = evaluate(model, train.X, train.labels);
    const Evaluation va = evaluate(model, val.X, val.labels);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = tr.loss;
    rec.val_loss = va.loss;
    rec.train_acc = tr.accuracy;
    rec.val_acc = va.accuracy;
    rec.utilization = tr.utilization;
    if (cfg.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    result.trace.epochs.push_back(std::move(rec));

    if (va.loss < result.trace.best_val_loss - cfg.min_delta) {
      result.trace.best_val_loss = va.loss;
      result.trace.best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  if (result.trace.best_epoch > 0) assign_params(model, best_params);
  result.model = std::move(model);
  return result;
}

inline void write_trace_csv(const TrainTrace& trace, std::size_t n_experts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "epoch,train_loss,val_loss,train_acc,val_acc,wall_ms";
  for (std::size_t e = 0; e < n_experts; ++e) out << ",util_" << e;
  out << '\n' << std::setprecision(17);
  for (const auto& r : trace.epochs) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.train_acc << ',' << r.val_acc << ','
        << r.wall_ms;
    for (double u : r.utilization) out << ',' << u;
    out << '\n';
  }
}

}  // namespace qmoe

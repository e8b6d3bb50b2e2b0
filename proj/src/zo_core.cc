// Copyright 2026 The zomem Authors.
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

#include "zomem/zo_core.h"

#include <cmath>
#include <numeric>
#include <string>

#include "zomem/error.h"

namespace zomem {

namespace {

constexpr double kLatticeScale = 0x1.0p44;

// theta_i += multiple * snap(eps * z_i), for the stream of `seed`.
void shift_along(ParameterVector& theta, PerturbationSeed seed, double epsilon,
                 double multiple) {
  NoiseStream stream(seed);
  for (double& v : theta.values()) {
    v += multiple * snap_to_lattice(epsilon * stream.next());
  }
}

}  // namespace

double snap_to_lattice(double value) {
  return std::nearbyint(value * kLatticeScale) * kLatticeSpacing;
}

void snap_to_lattice(ParameterVector& theta) {
  for (double& v : theta.values()) {
    v = snap_to_lattice(v);
  }
}

bool on_lattice(const ParameterVector& theta) {
  for (const double v : theta.values()) {
    if (!std::isfinite(v) || std::abs(v) > kLatticeMagnitudeLimit ||
        snap_to_lattice(v) != v) {
      return false;
    }
  }
  return true;
}

void validate(const ZOConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !(cfg.epsilon <= kMaxEpsilon)) {
    throw Error(ErrorCode::kInvalidArgument,
                "epsilon must lie in (0, " + std::to_string(kMaxEpsilon) +
                    "], got " + std::to_string(cfg.epsilon));
  }
  if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "learning_rate must be finite and >= 0, got " +
                    std::to_string(cfg.learning_rate));
  }
  if (cfg.num_perturbations < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "num_perturbations must be >= 1, got " +
                    std::to_string(cfg.num_perturbations));
  }
}

DirectionalDerivative spsa_directional_derivative(const LossFn& loss_fn,
                                                  ParameterVector& theta,
                                                  PerturbationSeed seed,
                                                  double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon <= kMaxEpsilon)) {
    throw Error(ErrorCode::kInvalidArgument,
                "epsilon must lie in (0, " + std::to_string(kMaxEpsilon) +
                    "], got " + std::to_string(epsilon));
  }
  if (!on_lattice(theta)) {
    throw Error(ErrorCode::kInvalidArgument,
                "theta is not on the perturbation lattice; snap it first");
  }
  DirectionalDerivative out;
  shift_along(theta, seed, epsilon, 1.0);
  out.loss_plus = loss_fn(theta);
  shift_along(theta, seed, epsilon, -2.0);
  out.loss_minus = loss_fn(theta);
  shift_along(theta, seed, epsilon, 1.0);
  if (!std::isfinite(out.loss_plus) || !std::isfinite(out.loss_minus)) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "loss evaluation returned " + std::to_string(out.loss_plus) +
                    " / " + std::to_string(out.loss_minus));
  }
  out.projected_gradient = (out.loss_plus - out.loss_minus) / (2.0 * epsilon);
  return out;
}

double StepReport::mean_loss() const {
  if (losses_plus.empty()) {
    return 0.0;
  }
  const double sum =
      std::accumulate(losses_plus.begin(), losses_plus.end(), 0.0) +
      std::accumulate(losses_minus.begin(), losses_minus.end(), 0.0);
  return sum / static_cast<double>(2 * losses_plus.size());
}

PerturbationSeed step_seed(std::uint64_t master_seed, std::uint64_t step_index,
                           std::uint64_t index) {
  return PerturbationSeed{mix_seed(master_seed, step_index), index};
}

StepReport mezo_step(const LossFn& loss_fn, ParameterVector& theta,
                     const ZOConfig& cfg, std::uint64_t step_index) {
  validate(cfg);
  snap_to_lattice(theta);
  if (!on_lattice(theta)) {
    throw Error(ErrorCode::kInvalidArgument,
                "theta exceeds the perturbation lattice magnitude limit");
  }
  const auto n = static_cast<std::size_t>(cfg.num_perturbations);
  StepReport report;
  report.projected_gradients.reserve(n);
  report.losses_plus.reserve(n);
  report.losses_minus.reserve(n);
  report.seeds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PerturbationSeed seed = step_seed(cfg.master_seed, step_index, i);
    const DirectionalDerivative d =
        spsa_directional_derivative(loss_fn, theta, seed, cfg.epsilon);
    report.projected_gradients.push_back(d.projected_gradient);
    report.losses_plus.push_back(d.loss_plus);
    report.losses_minus.push_back(d.loss_minus);
    report.seeds.push_back(seed);
  }
  if (cfg.learning_rate == 0.0) {
    return report;
  }
  // One pass over theta with all n streams open: O(n) generator state.
  std::vector<NoiseStream> streams;
  streams.reserve(n);
  for (const PerturbationSeed& seed : report.seeds) {
    streams.emplace_back(seed);
  }
  const double scale = cfg.learning_rate / static_cast<double>(n);
  for (double& v : theta.values()) {
    double direction = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      direction += report.projected_gradients[i] * streams[i].next();
    }
    v = snap_to_lattice(v - scale * direction);
  }
  return report;
}

double bp_sgd_step(const LossAndGradFn& loss_and_grad_fn,
                   ParameterVector& theta, double learning_rate) {
  ParameterVector grad = theta.zeros_like();
  const double loss = loss_and_grad_fn(theta, grad);
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "loss evaluation returned " + std::to_string(loss));
  }
  if (grad.size() != theta.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "gradient has " + std::to_string(grad.size()) +
                    " elements, theta has " + std::to_string(theta.size()));
  }
  if (!grad.all_finite()) {
    throw Error(ErrorCode::kNonFiniteGrad, "gradient has non-finite entries");
  }
  auto values = theta.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] -= learning_rate * g[i];
  }
  return loss;
}

}  // namespace zomem

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

// Zeroth-order (MeZO / central SPSA) gradient estimation and the SGD update.
//
// The perturbation z is regenerated from its seed every time it is needed, so
// a step never holds a parameter-sized buffer besides theta itself.
//
// Bitwise restoration. A shift theta += c * eps * z followed by its inverse
// only cancels exactly when every intermediate sum is exact. theta is
// therefore kept on a dyadic lattice (multiples of kLatticeSpacing, magnitude
// at most kLatticeMagnitudeLimit) and the displacement eps * z is rounded to
// the same lattice; all sums then stay below 2^53 lattice units and are exact.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "zomem/noise.h"
#include "zomem/parameter_vector.h"

namespace zomem {

inline constexpr double kLatticeSpacing = 0x1.0p-44;
inline constexpr double kLatticeMagnitudeLimit = 256.0;
// Keeps |theta +- 2 eps z| below 2^9, where lattice sums stop being exact.
inline constexpr double kMaxEpsilon = 8.0;

double snap_to_lattice(double value);
void snap_to_lattice(ParameterVector& theta);
bool on_lattice(const ParameterVector& theta);

struct ZOConfig {
  double epsilon = 1e-3;
  double learning_rate = 1e-3;
  int num_perturbations = 5;
  std::uint64_t master_seed = 0;
};

// Throws Error{kInvalidArgument} unless 0 < eps <= kMaxEpsilon, lr >= 0 and
// n >= 1.
void validate(const ZOConfig& cfg);

using LossFn = std::function<double(const ParameterVector&)>;
// Returns the loss and writes the gradient into grad (same layout as theta).
using LossAndGradFn =
    std::function<double(const ParameterVector&, ParameterVector& grad)>;

struct DirectionalDerivative {
  double projected_gradient = 0.0;  // (loss_plus - loss_minus) / (2 eps)
  double loss_plus = 0.0;
  double loss_minus = 0.0;
};

// Central difference of loss_fn along the regenerated direction z:
// evaluates at theta + eps z and theta - eps z, then restores theta bitwise.
// theta must be on the lattice. Throws Error{kNonFiniteLoss} (after
// restoring theta) if either evaluation is not finite.
DirectionalDerivative spsa_directional_derivative(const LossFn& loss_fn,
                                                  ParameterVector& theta,
                                                  PerturbationSeed seed,
                                                  double epsilon);

struct StepReport {
  std::vector<double> projected_gradients;
  std::vector<double> losses_plus;
  std::vector<double> losses_minus;
  std::vector<PerturbationSeed> seeds;

  double mean_loss() const;
};

// Seed of perturbation `index` at step `step_index`.
PerturbationSeed step_seed(std::uint64_t master_seed, std::uint64_t step_index,
                           std::uint64_t index);

// One MeZO step: n projected gradients g_i, then
//   theta <- theta - (lr / n) * sum_i g_i z_i
// with the sum taken in ascending i and each z_i streamed again.
// theta is first snapped to the lattice (a no-op for lattice-valued theta)
// and the updated values are snapped as well. On a non-finite loss the
// update is skipped and the error propagates.
StepReport mezo_step(const LossFn& loss_fn, ParameterVector& theta,
                     const ZOConfig& cfg, std::uint64_t step_index);

// theta <- theta - lr * grad. Throws Error{kNonFiniteLoss} or
// Error{kNonFiniteGrad} without touching theta. Returns the loss at theta.
double bp_sgd_step(const LossAndGradFn& loss_and_grad_fn,
                   ParameterVector& theta, double learning_rate);

}  // namespace zomem

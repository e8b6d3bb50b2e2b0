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

#include "zomem/verify.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "zomem/error.h"
#include "zomem/transformer.h"
#include "zomem/zo_core.h"

namespace zomem {

namespace {

ParameterVector lattice_theta(int dim, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ParameterVector theta;
  theta.add_segment("theta", static_cast<std::size_t>(dim));
  for (double& v : theta.values()) {
    v = snap_to_lattice(normal(rng));
  }
  return theta;
}

// Smooth, non-quadratic, separable: sum log cosh(x) + 0.05 x^4.
double bumpy_loss(const ParameterVector& t) {
  double s = 0.0;
  for (const double v : t.values()) {
    s += std::log(std::cosh(v)) + 0.05 * v * v * v * v;
  }
  return s;
}

double bumpy_grad(double v) { return std::tanh(v) + 0.2 * v * v * v; }

}  // namespace

void validate(const VerifyOptions& options) {
  if (options.dim < 1 || options.dim > kMaxVerifyDim) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("dim must lie in [1, {}], got {}", kMaxVerifyDim,
                            options.dim));
  }
  if (!(options.epsilon > 0.0) || !(options.epsilon <= kMaxEpsilon)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("epsilon must lie in (0, {}], got {}", kMaxEpsilon,
                            options.epsilon));
  }
}

CheckResult check_restoration(const VerifyOptions& options) {
  validate(options);
  std::mt19937_64 rng(mix_seed(options.seed, 1));
  int mismatches = 0;
  for (int s = 0; s < kRestorationSeeds; ++s) {
    ParameterVector theta = lattice_theta(options.dim, rng, 2.0);
    const ParameterVector before = theta;
    spsa_directional_derivative(bumpy_loss, theta,
                                {rng(), static_cast<std::uint64_t>(s)},
                                options.epsilon);
    mismatches += theta == before ? 0 : 1;
  }
  CheckResult r;
  r.name = "restoration";
  r.value = mismatches;
  r.passed = mismatches == 0;
  r.detail = fmt::format("{} of {} seeds left theta changed", mismatches,
                         kRestorationSeeds);
  return r;
}

CheckResult check_unbiasedness(const VerifyOptions& options) {
  validate(options);
  const int d = std::min(options.dim, kUnbiasedMaxDim);
  std::mt19937_64 rng(mix_seed(options.seed, 2));
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd a =
      Eigen::MatrixXd::NullaryExpr(d, d, [&] { return normal(rng); });
  const Eigen::MatrixXd q =
      a * a.transpose() / d + Eigen::MatrixXd::Identity(d, d);
  ParameterVector theta = lattice_theta(d, rng, 1.0);
  const Eigen::VectorXd th =
      Eigen::Map<const Eigen::VectorXd>(theta.values().data(), d);
  const Eigen::VectorXd target = q * th;
  const LossFn loss = [&](const ParameterVector& t) {
    const Eigen::Map<const Eigen::VectorXd> v(t.values().data(), d);
    return 0.5 * v.dot(q * v);
  };
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd z(d);
  const std::uint64_t stream_seed = mix_seed(options.seed, 3);
  for (int m = 0; m < kUnbiasedDirections; ++m) {
    const PerturbationSeed seed{stream_seed, static_cast<std::uint64_t>(m)};
    const double g =
        spsa_directional_derivative(loss, theta, seed, options.epsilon)
            .projected_gradient;
    NoiseStream stream(seed);
    for (int i = 0; i < d; ++i) {
      z[i] = snap_to_lattice(options.epsilon * stream.next()) / options.epsilon;
    }
    mean += g * z;
    second.noalias() += z * z.transpose();
  }
  mean /= kUnbiasedDirections;
  second /= kUnbiasedDirections;
  const double rel = (mean - target).norm() / target.norm();
  const double identity = (mean - second * target).norm() / target.norm();
  CheckResult r;
  r.name = "unbiasedness";
  r.value = rel;
  r.passed = rel < kUnbiasedTolerance && identity < kQuadraticIdentityTolerance;
  r.detail = fmt::format(
      "dim {}, {} directions: |mean(g z) - Q theta| / |Q theta| = {:.3e} "
      "(bound {}); deviation from the sample second moment {:.3e} (bound {})",
      d, kUnbiasedDirections, rel, kUnbiasedTolerance, identity,
      kQuadraticIdentityTolerance);
  return r;
}

CheckResult check_gradients(const VerifyOptions& options) {
  validate(options);
  ModelConfig cfg;
  cfg.hidden_dim = 16;
  cfg.num_layers = 2;
  cfg.num_heads = cfg.kv_heads = 4;
  cfg.vocab_size = 32;
  cfg.context_length = 8;
  cfg.batch_size = 1;
  ParameterVector w = make_transformer_parameters(cfg);
  init_transformer_weights(w, cfg, mix_seed(options.seed, 4));
  std::mt19937_64 rng(mix_seed(options.seed, 5));
  TokenBatch input{1, cfg.context_length, {}};
  std::vector<std::int32_t> targets;
  for (std::int64_t i = 0; i < cfg.context_length; ++i) {
    input.tokens.push_back(static_cast<std::int32_t>(rng() % cfg.vocab_size));
    targets.push_back(static_cast<std::int32_t>(rng() % cfg.vocab_size));
  }
  const BackwardResult exact = backward(cfg, w, input, targets);
  auto loss_at = [&](const ParameterVector& p) {
    return cross_entropy(forward(cfg, p, input, LedgerMode::kMezo).logits,
                         cfg.vocab_size, targets);
  };
  double worst = 0.0;
  int failures = 0;
  for (int k = 0; k < kGradientCoordinates; ++k) {
    const std::size_t i = rng() % w.size();
    const double orig = w.values()[i];
    w.values()[i] = orig + kGradientStep;
    const double lp = loss_at(w);
    w.values()[i] = orig - kGradientStep;
    const double lm = loss_at(w);
    w.values()[i] = orig;
    const double fd = (lp - lm) / (2 * kGradientStep);
    const double g = exact.gradient.values()[i];
    const double rel = std::abs(g - fd) /
                       std::max({std::abs(g), std::abs(fd), kGradientFloor});
    worst = std::max(worst, rel);
    failures += rel < kGradientTolerance ? 0 : 1;
  }
  CheckResult r;
  r.name = "gradient";
  r.value = worst;
  r.passed = failures == 0;
  r.detail = fmt::format(
      "{} coordinates of the D=16 L=2 H=4 V=32 N=8 model, worst relative "
      "error {:.3e} (bound {})",
      kGradientCoordinates, worst, kGradientTolerance);
  return r;
}

CheckResult check_cosine(const VerifyOptions& options) {
  validate(options);
  const int d = std::min(options.dim, kCosineMaxDim);
  std::mt19937_64 rng(mix_seed(options.seed, 6));
  int positive = 0;
  for (int trial = 0; trial < kCosineTrials; ++trial) {
    ParameterVector theta = lattice_theta(d, rng, 1.0);
    const ParameterVector before = theta;
    ZOConfig cfg;
    cfg.epsilon = options.epsilon;
    cfg.learning_rate = 1e-2;
    cfg.num_perturbations = kCosinePerturbations;
    cfg.master_seed = mix_seed(options.seed, 7);
    mezo_step(bumpy_loss, theta, cfg, static_cast<std::uint64_t>(trial));
    double dot = 0.0, gg = 0.0, ss = 0.0;
    for (int i = 0; i < d; ++i) {
      const double grad = bumpy_grad(before.values()[i]);
      const double step = theta.values()[i] - before.values()[i];
      dot -= grad * step;
      gg += grad * grad;
      ss += step * step;
    }
    positive += gg > 0 && ss > 0 && dot / std::sqrt(gg * ss) > 0 ? 1 : 0;
  }
  CheckResult r;
  r.name = "cosine";
  r.value = static_cast<double>(positive) / kCosineTrials;
  r.passed = r.value > kCosineMinRate;
  r.detail = fmt::format(
      "dim {}, n = {}: {} of {} steps point downhill (rate bound > {})", d,
      kCosinePerturbations, positive, kCosineTrials, kCosineMinRate);
  return r;
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  validate(options);
  return {check_restoration(options), check_unbiasedness(options),
          check_gradients(options), check_cosine(options)};
}

}  // namespace zomem

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

// Self-checks of the zeroth-order estimator and the toy model's gradients,
// runnable from the command line.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zomem {

inline constexpr int kMaxVerifyDim = 4096;

struct VerifyOptions {
  int dim = 8;  // flat parameter count for the estimator checks
  std::uint64_t seed = 0;
  double epsilon = 1e-3;
};

// Tolerances and sample sizes of the individual checks.
inline constexpr int kRestorationSeeds = 1000;
inline constexpr int kUnbiasedMaxDim = 8;
inline constexpr int kUnbiasedDirections = 1000000;
inline constexpr double kUnbiasedTolerance = 0.02;
// |mean(g z) - mean(z z^T) Q theta| / |Q theta|: zero up to rounding because
// central differences are exact on quadratics.
inline constexpr double kQuadraticIdentityTolerance = 1e-8;
inline constexpr int kGradientCoordinates = 200;
inline constexpr double kGradientStep = 1e-5;
inline constexpr double kGradientTolerance = 1e-5;
// Relative errors are taken against max(|g|, |fd|, kGradientFloor).
inline constexpr double kGradientFloor = 1e-4;
inline constexpr int kCosineMaxDim = 64;
inline constexpr int kCosineTrials = 200;
inline constexpr int kCosinePerturbations = 5;
inline constexpr double kCosineMinRate = 0.95;

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;  // the measured quantity compared against its bound
  std::string detail;
};

// Throws Error{kInvalidArgument} for dim outside [1, kMaxVerifyDim] or an
// epsilon outside (0, kMaxEpsilon].
void validate(const VerifyOptions& options);

CheckResult check_restoration(const VerifyOptions& options);
CheckResult check_unbiasedness(const VerifyOptions& options);
CheckResult check_gradients(const VerifyOptions& options);
CheckResult check_cosine(const VerifyOptions& options);

// All four, in the order above.
std::vector<CheckResult> run_verification(const VerifyOptions& options);

}  // namespace zomem

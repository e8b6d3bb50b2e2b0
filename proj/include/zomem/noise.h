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

// Counter-based standard-normal noise for zeroth-order perturbations.
//
// A perturbation direction is never stored: any consumer that needs z again
// rebuilds a NoiseStream from the same PerturbationSeed and reads it in the
// same order.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace zomem {

// Philox4x32-10 (Salmon et al., SC'11). Pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

struct PerturbationSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;

  friend bool operator==(const PerturbationSeed&,
                         const PerturbationSeed&) = default;
};

// Sequential reader of N(0, 1) samples for one (seed, stream_index) pair.
// The key is the seed; the stream index occupies the upper half of the
// Philox counter and the block index the lower half, so distinct streams
// never share a counter value.
class NoiseStream {
 public:
  explicit NoiseStream(PerturbationSeed seed);

  double next();

  // Largest magnitude next() can return: sqrt(-2 ln 2^-53).
  static double max_abs_sample();

 private:
  void refill();

  PhiloxKey key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_ = 0;
  std::array<double, 2> buffer_{};
  int available_ = 0;
};

// Materializes length samples. For tests and tooling; the optimizer itself
// always streams.
std::vector<double> generate_noise(PerturbationSeed seed, std::size_t length);

// Deterministic 64-bit mixing used to derive per-step seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace zomem

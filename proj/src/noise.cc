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

#include "zomem/noise.h"

#include <cmath>
#include <numbers>

namespace zomem {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t product = std::uint64_t{a} * std::uint64_t{b};
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// Uniform in (0, 1]: 53 random bits, never zero so log() is finite.
inline double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

NoiseStream::NoiseStream(PerturbationSeed seed)
    : key_{static_cast<std::uint32_t>(seed.seed),
           static_cast<std::uint32_t>(seed.seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(seed.stream_index)),
      stream_hi_(static_cast<std::uint32_t>(seed.stream_index >> 32)) {}

void NoiseStream::refill() {
  const PhiloxCounter ctr{static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32), stream_lo_,
                          stream_hi_};
  ++block_;
  const PhiloxCounter out = philox4x32_10(ctr, key_);
  // Box-Muller: one block yields two 53-bit uniforms, hence two normals.
  const double u1 = to_unit_open_closed(out[0], out[1]);
  const double u2 = to_unit_open_closed(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  buffer_[0] = radius * std::cos(angle);
  buffer_[1] = radius * std::sin(angle);
  available_ = 2;
}

double NoiseStream::next() {
  if (available_ == 0) {
    refill();
  }
  const double value = buffer_[2 - available_];
  --available_;
  return value;
}

double NoiseStream::max_abs_sample() {
  return std::sqrt(-2.0 * std::log(0x1.0p-53));
}

std::vector<double> generate_noise(PerturbationSeed seed, std::size_t length) {
  std::vector<double> out(length);
  NoiseStream stream(seed);
  for (double& v : out) {
    v = stream.next();
  }
  return out;
}

namespace {

// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t finalize64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return finalize64(finalize64(a) + 0x9e3779b97f4a7c15ull * (b + 1));
}

}  // namespace zomem

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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace zomem {
namespace {

// Known-answer vectors published with the Random123 reference library.
TEST(PhiloxTest, KnownAnswerZero) {
  const PhiloxCounter out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu,
                                0x9b00dbd8u}));
}

TEST(PhiloxTest, KnownAnswerOnes) {
  const std::uint32_t f = 0xffffffffu;
  const PhiloxCounter out = philox4x32_10({f, f, f, f}, {f, f});
  EXPECT_EQ(out, (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u,
                                0x6d5451fdu}));
}

TEST(PhiloxTest, KnownAnswerPi) {
  const PhiloxCounter out =
      philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                    {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u,
                                0x24126ea1u}));
}

TEST(NoiseStreamTest, Deterministic) {
  const PerturbationSeed s{12345, 6};
  EXPECT_EQ(generate_noise(s, 1001), generate_noise(s, 1001));
}

TEST(NoiseStreamTest, PrefixStable) {
  const PerturbationSeed s{99, 0};
  const auto shortv = generate_noise(s, 7);
  const auto longv = generate_noise(s, 64);
  for (std::size_t i = 0; i < shortv.size(); ++i) {
    EXPECT_EQ(shortv[i], longv[i]);
  }
}

TEST(NoiseStreamTest, ZeroLength) {
  EXPECT_TRUE(generate_noise({1, 1}, 0).empty());
}

TEST(NoiseStreamTest, StreamsAndSeedsDiffer) {
  std::set<double> firsts;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::uint64_t stream = 0; stream < 4; ++stream) {
      firsts.insert(generate_noise({seed, stream}, 1)[0]);
    }
  }
  EXPECT_EQ(firsts.size(), 16u);
  // Streams beyond 2^32 must not alias the low words.
  EXPECT_NE(generate_noise({5, 1}, 4), generate_noise({5, (1ull << 32) + 1}, 4));
  EXPECT_NE(generate_noise({1, 0}, 4), generate_noise({1ull << 32 | 1, 0}, 4));
}

TEST(NoiseStreamTest, Moments) {
  const std::size_t n = 1000000;
  const auto z = generate_noise({2024, 3}, n);
  double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0, max_abs = 0.0;
  for (double v : z) {
    ASSERT_TRUE(std::isfinite(v));
    sum += v;
    sum_sq += v * v;
    sum_4 += v * v * v * v;
    max_abs = std::max(max_abs, std::abs(v));
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // Standard errors are 1e-3 for the mean and 1.4e-3 for the variance.
  EXPECT_LT(std::abs(mean), 5e-3);
  EXPECT_LT(std::abs(var - 1.0), 7e-3);
  EXPECT_LT(std::abs(sum_4 / n - 3.0), 0.05);
  EXPECT_LE(max_abs, NoiseStream::max_abs_sample());
}

TEST(NoiseStreamTest, MaxAbsSample) {
  EXPECT_NEAR(NoiseStream::max_abs_sample(), 8.571674348652905, 1e-12);
}

TEST(MixSeedTest, DistinctAndStable) {
  EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    seen.insert(mix_seed(0, s));
  }
  EXPECT_EQ(seen.size(), 1000u);
}

}  // namespace
}  // namespace zomem

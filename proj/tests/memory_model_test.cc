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

#include "zomem/memory_model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "zomem/error.h"

namespace zomem {
namespace {

// Values hand-evaluated with exact rational arithmetic for the LLaMA-2 7B
// shape (B=1, V=32000, N=2048, L=32, b=2, H=32, D=4096), L'=1.
constexpr double kActivations7B = 30601641984.0;
constexpr double kBpTotal7B = 57420021760.0;
constexpr double kMezoTotal7B = 14365491200.0;
constexpr double kBpCkptActivations7B = 5409657140.582339;

// Direct transcription of the three formulas, kept apart from the library.
double oracle_activations(const ModelConfig& c) {
  const long double B = c.batch_size, L = c.num_layers, N = c.context_length,
                    D = c.hidden_dim, H = c.num_heads, b = c.bytes_per_param;
  return static_cast<double>(B * L * N * D *
                             (2 + 16 * b + (2 * b + 1) * N * H / D));
}

double oracle_bp(const ModelConfig& c, bool ckpt) {
  const long double L = c.num_layers, D = c.hidden_dim, V = c.vocab_size,
                    b = c.bytes_per_param;
  long double a = oracle_activations(c);
  if (ckpt) {
    a = a * std::sqrt(L) / L;
  }
  return static_cast<double>(24 * b * L * D * D + 4 * b * V * D + a);
}

double oracle_mezo(const ModelConfig& c) {
  const long double L = c.num_layers, D = c.hidden_dim, V = c.vocab_size,
                    b = c.bytes_per_param;
  return static_cast<double>(12 * b * L * D * D + 2 * b * V * D +
                             c.stored_layers / L * oracle_activations(c));
}

ModelConfig random_config(std::mt19937_64& rng) {
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  ModelConfig c;
  c.num_heads = pick(1, 64);
  c.kv_heads = c.num_heads;
  c.hidden_dim = c.num_heads * pick(1, 256);
  c.num_layers = pick(1, 120);
  c.context_length = pick(1, 8192);
  c.vocab_size = pick(2, 100000);
  c.batch_size = pick(1, 16);
  c.bytes_per_param = std::uniform_real_distribution<double>(0.5, 4.0)(rng);
  c.stored_layers = std::uniform_real_distribution<double>(
      0.0, static_cast<double>(c.num_layers))(rng);
  return c;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

TEST(ParamElementsTest, Llama7BSimplified) {
  EXPECT_EQ(param_elements(llama2_7b(), ParamCountMode::kSimplified),
            6704594944);
}

TEST(ParamElementsTest, AllOnes) {
  ModelConfig c;
  c.num_layers = c.hidden_dim = c.vocab_size = 1;
  c.num_heads = c.kv_heads = 1;
  c.stored_layers = 1;
  EXPECT_EQ(param_elements(c, ParamCountMode::kSimplified), 14);
}

TEST(ParamElementsTest, GenericMatchesSimplifiedAtLlamaShape) {
  const ModelConfig c = llama2_7b();
  EXPECT_EQ(param_elements(c, ParamCountMode::kGeneric),
            param_elements(c, ParamCountMode::kSimplified));
}

TEST(ParamElementsTest, GenericWithGroupedHeadsAndSwiGlu) {
  ModelConfig c = llama2_7b();
  c.kv_heads = 8;
  c.num_mlps = 3;
  c.expansion_factor = 2.6875;  // 11008 / 4096
  // 32 * (2*4096^2 + 2*4096*1024) + 3*32*4096*11008 + 2*32000*4096
  EXPECT_EQ(param_elements(c, ParamCountMode::kGeneric), 5932843008);
}

TEST(ActivationBytesTest, Llama7B) {
  EXPECT_EQ(activation_bytes(llama2_7b()), kActivations7B);
}

TEST(ActivationBytesTest, AllOnes) {
  ModelConfig c;
  c.batch_size = c.num_layers = c.context_length = c.hidden_dim = 1;
  c.num_heads = c.kv_heads = 1;
  c.bytes_per_param = 1;
  EXPECT_EQ(activation_bytes(c), 21.0);
}

TEST(ActivationBytesTest, LongContextInnerFactor) {
  ModelConfig c = llama2_7b();
  c.context_length = 32768;
  const double blnd = 1.0 * 32 * 32768 * 4096;
  EXPECT_EQ(activation_bytes(c) / blnd, 1314.0);
}

TEST(BpMemoryTest, Llama7B) {
  const MemoryBreakdown m = bp_memory(llama2_7b(), false);
  EXPECT_EQ(m.mode, MemoryMode::kBp);
  EXPECT_EQ(m.weights_bytes, 12884901888.0);
  EXPECT_EQ(m.gradients_bytes, 12884901888.0);
  EXPECT_EQ(m.embedding_head_bytes, 1048576000.0);
  EXPECT_EQ(m.activations_bytes, kActivations7B);
  EXPECT_EQ(m.total_bytes, kBpTotal7B);
}

TEST(BpMemoryTest, Llama7BCheckpointed) {
  const MemoryBreakdown m = bp_memory(llama2_7b(), true);
  EXPECT_EQ(m.mode, MemoryMode::kBpCheckpointed);
  EXPECT_LT(relative_error(m.activations_bytes, kBpCkptActivations7B), 1e-14);
}

TEST(BpMemoryTest, SingleLayerCheckpointingIsIdentity) {
  ModelConfig c = llama2_7b();
  c.num_layers = 1;
  EXPECT_EQ(bp_memory(c, true).total_bytes, bp_memory(c, false).total_bytes);
}

TEST(MezoMemoryTest, Llama7B) {
  const MemoryBreakdown m = mezo_memory(llama2_7b());
  EXPECT_EQ(m.gradients_bytes, 0.0);
  EXPECT_EQ(m.weights_bytes, 12884901888.0);
  EXPECT_EQ(m.embedding_head_bytes, 524288000.0);
  EXPECT_EQ(m.activations_bytes, 956301312.0);
  EXPECT_EQ(m.total_bytes, kMezoTotal7B);
}

TEST(MezoMemoryTest, StoredLayersExtremes) {
  ModelConfig c = llama2_7b();
  c.stored_layers = 0;
  EXPECT_EQ(mezo_memory(c).activations_bytes, 0.0);
  EXPECT_EQ(mezo_memory(c).total_bytes, 12884901888.0 + 524288000.0);
  c.stored_layers = 32;
  EXPECT_EQ(mezo_memory(c).activations_bytes, kActivations7B);
}

TEST(MemoryRatioTest, PaperRegimes) {
  ModelConfig c = llama2_7b();
  c.context_length = 256;
  EXPECT_NEAR(memory_ratio(c, false), 2.10286783042394, 1e-12);
  c = llama2_7b();
  c.num_layers = 100;
  EXPECT_NEAR(memory_ratio(c, false), 4.24495127097358, 1e-12);
  EXPECT_NEAR(memory_ratio(c, true), 2.18326132824274, 1e-12);
}

TEST(MemoryRatioTest, LayerAsymptotes) {
  ModelConfig c = llama2_7b();
  c.num_layers = 10000;
  EXPECT_NEAR(memory_ratio(c, false), 4.37365218830992, 1e-12);
  // The checkpointed ratio only approaches 2 like 1/sqrt(L); at L = 10^4 it
  // is still 2.0233.
  EXPECT_NEAR(memory_ratio(c, true), 2.02326644473438, 1e-12);
  c.num_layers = 1000000;
  EXPECT_LT(memory_ratio(c, true), 2.003);
  EXPECT_GT(memory_ratio(c, true), 2.0);
}

TEST(MemoryRatioTest, HiddenDimAsymptote) {
  ModelConfig c = llama2_7b();
  c.hidden_dim = 1 << 20;
  EXPECT_NEAR(memory_ratio(c, false), 2.00261719162785, 1e-12);
}

TEST(MemoryInvariantTest, ExactnessOnRandomConfigs) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const ModelConfig c = random_config(rng);
    EXPECT_LT(relative_error(bp_memory(c, false).total_bytes, oracle_bp(c, false)), 1e-12);
    EXPECT_LT(relative_error(bp_memory(c, true).total_bytes, oracle_bp(c, true)), 1e-12);
    EXPECT_LT(relative_error(mezo_memory(c).total_bytes, oracle_mezo(c)), 1e-12);
  }
}

TEST(MemoryInvariantTest, OrderingAndComponents) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const ModelConfig c = random_config(rng);
    const MemoryBreakdown bp = bp_memory(c, false);
    const MemoryBreakdown ck = bp_memory(c, true);
    const MemoryBreakdown mz = mezo_memory(c);
    for (const MemoryBreakdown* m : {&bp, &ck, &mz}) {
      EXPECT_GE(m->weights_bytes, 0);
      EXPECT_GE(m->activations_bytes, 0);
      EXPECT_EQ(m->total_bytes, m->weights_bytes + m->gradients_bytes +
                                    m->embedding_head_bytes +
                                    m->activations_bytes);
    }
    EXPECT_LE(mz.total_bytes, bp.total_bytes);
    if (c.num_layers == 1) {
      EXPECT_EQ(ck.total_bytes, bp.total_bytes);
    } else {
      EXPECT_LT(ck.total_bytes, bp.total_bytes);
    }
  }
}

TEST(MemoryInvariantTest, StrictlyIncreasingInEachField) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const ModelConfig c = random_config(rng);
    for (const MemoryMode mode :
         {MemoryMode::kBp, MemoryMode::kBpCheckpointed, MemoryMode::kMezo}) {
      const double base = memory_for(c, mode).total_bytes;
      ModelConfig up = c;
      up.context_length += 1;
      EXPECT_GT(memory_for(up, mode).total_bytes, base);
      up = c;
      up.num_layers += 1;
      EXPECT_GT(memory_for(up, mode).total_bytes, base);
      up = c;
      up.hidden_dim += c.num_heads;
      EXPECT_GT(memory_for(up, mode).total_bytes, base);
      up = c;
      up.batch_size += 1;
      if (mode != MemoryMode::kMezo || c.stored_layers > 0) {
        EXPECT_GT(memory_for(up, mode).total_bytes, base);
      }
      up = c;
      up.bytes_per_param *= 1.5;
      EXPECT_GT(memory_for(up, mode).total_bytes, base);
    }
  }
}

TEST(ValidationTest, RejectsBadFields) {
  ModelConfig c = llama2_7b();
  c.hidden_dim = 4095;
  EXPECT_THROW(activation_bytes(c), Error);
  c = llama2_7b();
  c.stored_layers = 33;
  EXPECT_THROW(mezo_memory(c), Error);
  c = llama2_7b();
  c.bytes_per_param = 0;
  try {
    bp_memory(c, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidConfig);
    EXPECT_NE(std::string(e.what()).find("bytes_per_param"), std::string::npos);
  }
}

TEST(SweepTest, ContextRatioIsMonotone) {
  SweepSpec spec;
  spec.axis = SweepAxis::kContext;
  for (std::int64_t n = 1; n <= 32768; n *= 2) {
    spec.values.push_back(n);
  }
  spec.base = llama2_7b();
  const auto rows = sweep(spec, false);
  ASSERT_EQ(rows.size(), spec.values.size());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].ratio, rows[i - 1].ratio);
  }
  EXPECT_NEAR(rows.back().ratio, 29.8802077577633, 1e-9);
}

TEST(SweepTest, HiddenDimStart) {
  SweepSpec spec{SweepAxis::kHidden, {512, 1024, 32768}, llama2_7b()};
  const auto rows = sweep(spec, false);
  EXPECT_NEAR(rows.front().ratio, 23.7770597738288, 1e-9);
  EXPECT_NEAR(sweep(spec, true).front().ratio, 4.65451778584584, 1e-9);
}

TEST(SweepTest, SingleValueMatchesDirectCalls) {
  ModelConfig base = llama2_7b();
  SweepSpec spec{SweepAxis::kLayers, {48}, base};
  const auto rows = sweep(spec, true);
  ASSERT_EQ(rows.size(), 1u);
  base.num_layers = 48;
  EXPECT_EQ(rows[0].axis_value, 48);
  EXPECT_EQ(rows[0].bp_total_bytes, bp_memory(base, true).total_bytes);
  EXPECT_EQ(rows[0].mezo_total_bytes, mezo_memory(base).total_bytes);
  EXPECT_EQ(rows[0].ratio, memory_ratio(base, true));
}

TEST(SweepTest, NamesOffendingValue) {
  SweepSpec spec{SweepAxis::kHidden, {512, 1000}, llama2_7b()};
  try {
    sweep(spec, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("value 1000"), std::string::npos);
  }
  spec.values = {};
  EXPECT_THROW(sweep(spec, false), Error);
  spec.values = {512, 512};
  EXPECT_THROW(sweep(spec, false), Error);
}

// Exhaustive scan over multiples of H; the bisection must agree.
std::int64_t scan_max_hidden(double budget, ModelConfig c, MemoryMode mode,
                             std::int64_t limit) {
  std::int64_t best = 0;
  for (std::int64_t d = c.num_heads; d <= limit; d += c.num_heads) {
    c.hidden_dim = d;
    const double m = mode == MemoryMode::kMezo
                         ? oracle_mezo(c)
                         : oracle_bp(c, mode == MemoryMode::kBpCheckpointed);
    if (m <= budget) {
      best = d;
    }
  }
  return best;
}

TEST(MaxDimensionTest, FixedPointAtKnownConfig) {
  const ModelConfig c = llama2_7b();
  const auto r = max_dimension(mezo_memory(c).total_bytes, c, FreeAxis::kHidden,
                               MemoryMode::kMezo);
  EXPECT_EQ(r.value, 4096);
  EXPECT_EQ(r.breakdown.total_bytes, kMezoTotal7B);
}

// 17 GB, N=1024, B=8, L=32, L'/L=0.41. With 32 heads the D-independent score
// term alone is 0.41 * 5 * B L N^2 H = 17.6e9 bytes, so no D fits; the scan
// agrees. With 16 heads the solver has an interior answer.
TEST(MaxDimensionTest, SeventeenGigabytes) {
  ModelConfig c = llama2_7b();
  c.context_length = 1024;
  c.batch_size = 8;
  c.stored_layers = 0.41 * 32;
  EXPECT_EQ(scan_max_hidden(17e9, c, MemoryMode::kMezo, 20000), 0);
  try {
    max_dimension(17e9, c, FreeAxis::kHidden, MemoryMode::kMezo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }

  c.num_heads = c.kv_heads = 16;
  const auto r = max_dimension(17e9, c, FreeAxis::kHidden, MemoryMode::kMezo);
  EXPECT_EQ(r.value, scan_max_hidden(17e9, c, MemoryMode::kMezo, 20000));
  EXPECT_GT(r.value, 0);
  EXPECT_EQ(r.value % 16, 0);
  EXPECT_LE(r.breakdown.total_bytes, 17e9);
  ModelConfig next = r.config;
  next.hidden_dim += c.num_heads;
  EXPECT_GT(mezo_memory(next).total_bytes, 17e9);
}

TEST(MaxDimensionTest, EightyGigabytesBpMatchesScan) {
  const ModelConfig c = llama2_7b();
  const auto r = max_dimension(80e9, c, FreeAxis::kHidden, MemoryMode::kBp);
  EXPECT_EQ(r.value, scan_max_hidden(80e9, c, MemoryMode::kBp, 20000));
}

TEST(MaxDimensionTest, RandomSmallRangesMatchScan) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    ModelConfig c = random_config(rng);
    c.hidden_dim = c.num_heads;
    const MemoryMode mode = static_cast<MemoryMode>(i % 3);
    const double budget =
        memory_for(c, mode).total_bytes *
        std::uniform_real_distribution<double>(1.0, 50.0)(rng);
    const auto r = max_dimension(budget, c, FreeAxis::kHidden, mode);
    EXPECT_EQ(r.value, scan_max_hidden(budget, c, mode, r.value + 50 * c.num_heads));
  }
}

TEST(MaxDimensionTest, LayersAxis) {
  ModelConfig c = llama2_7b();
  const auto r = max_dimension(80e9, c, FreeAxis::kLayers, MemoryMode::kBp);
  ModelConfig probe = c;
  probe.num_layers = r.value;
  EXPECT_LE(bp_memory(probe, false).total_bytes, 80e9);
  probe.num_layers = r.value + 1;
  EXPECT_GT(bp_memory(probe, false).total_bytes, 80e9);
  // stored_layers stays fixed; the smallest admissible L is ceil(L').
  c.stored_layers = 3.5;
  const auto tight = max_dimension(mezo_memory([&] {
                                     ModelConfig x = c;
                                     x.num_layers = 4;
                                     return x;
                                   }()).total_bytes,
                                   c, FreeAxis::kLayers, MemoryMode::kMezo);
  EXPECT_EQ(tight.value, 4);
}

TEST(MaxDimensionTest, Infeasible) {
  try {
    max_dimension(1.0, llama2_7b(), FreeAxis::kHidden, MemoryMode::kMezo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

}  // namespace
}  // namespace zomem

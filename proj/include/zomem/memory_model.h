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

// Analytic memory footprint of fine-tuning a decoder-only transformer with
// backpropagation (optionally checkpointed) versus forward-only MeZO.
//
// All arithmetic is done in double precision. Byte counts are reported
// unrounded; see units.h for display.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "zomem/model_config.h"

namespace zomem {

enum class MemoryMode { kBp, kBpCheckpointed, kMezo };

std::string_view memory_mode_name(MemoryMode mode);

enum class ParamCountMode {
  // 12 L D^2 + 2 V D.
  kSimplified,
  // Uses K, N_M and R; equal to kSimplified when K == H and N_M * R == 8.
  kGeneric,
};

struct MemoryBreakdown {
  double weights_bytes = 0.0;
  double gradients_bytes = 0.0;
  double embedding_head_bytes = 0.0;
  double activations_bytes = 0.0;
  double total_bytes = 0.0;
  MemoryMode mode = MemoryMode::kBp;
};

std::int64_t param_elements(const ModelConfig& cfg, ParamCountMode mode);

// Bytes of cached activations for a full BP forward pass:
//   B L N D (2 + 16 b + (2 b + 1) N H / D)
double activation_bytes(const ModelConfig& cfg);

// Weights and gradients of the transformer blocks, embedding/head with their
// gradients, and activations. Checkpointing keeps sqrt(L) of L layers
// (real-valued).
MemoryBreakdown bp_memory(const ModelConfig& cfg, bool checkpointed);

// Weights, embedding/head, and L'/L of the BP activation bytes.
MemoryBreakdown mezo_memory(const ModelConfig& cfg);

MemoryBreakdown memory_for(const ModelConfig& cfg, MemoryMode mode);

// BP total over MeZO total; larger means MeZO saves more.
double memory_ratio(const ModelConfig& cfg, bool checkpointed);

enum class SweepAxis { kContext, kLayers, kHidden };

std::string_view sweep_axis_name(SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::kContext;
  std::vector<std::int64_t> values;  // non-empty, strictly increasing
  ModelConfig base;
};

struct SweepRow {
  std::int64_t axis_value = 0;
  double bp_total_bytes = 0.0;
  double mezo_total_bytes = 0.0;
  double ratio = 0.0;
};

// Returns base with the swept field replaced by value.
ModelConfig with_axis_value(const ModelConfig& base, SweepAxis axis,
                            std::int64_t value);

std::vector<SweepRow> sweep(const SweepSpec& spec, bool checkpointed);

enum class FreeAxis { kHidden, kLayers };

struct MaxDimensionResult {
  std::int64_t value = 0;
  ModelConfig config;  // cfg with the free axis set to value
  MemoryBreakdown breakdown;
};

// Largest admissible value of the free axis whose total memory fits in
// budget_bytes. Hidden sizes are restricted to multiples of num_heads; layer
// counts start at max(1, ceil(stored_layers)) with stored_layers held fixed.
// Throws Error{kInfeasible} when even the smallest admissible value does not
// fit.
MaxDimensionResult max_dimension(double budget_bytes, const ModelConfig& cfg,
                                 FreeAxis free_axis, MemoryMode mode);

}  // namespace zomem

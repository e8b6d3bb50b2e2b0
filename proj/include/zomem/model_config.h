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

#pragma once

#include <cstdint>

namespace zomem {

// Architecture and training-shape description of a decoder-only transformer.
//
// Field defaults are the LLaMA-2 7B values with one buffered layer for MeZO.
struct ModelConfig {
  std::int64_t context_length = 2048;  // N, tokens
  std::int64_t num_layers = 32;        // L
  std::int64_t hidden_dim = 4096;      // D
  std::int64_t num_heads = 32;         // H
  std::int64_t kv_heads = 32;          // K
  std::int64_t num_mlps = 2;           // N_M, matrices per FFN block
  double expansion_factor = 4.0;       // R, FFN hidden size is D * R
  std::int64_t vocab_size = 32000;     // V
  std::int64_t batch_size = 1;         // B
  double bytes_per_param = 2.0;        // b
  double stored_layers = 1.0;          // L', layers of activations kept by MeZO

  std::int64_t head_dim() const { return hidden_dim / num_heads; }
  std::int64_t kv_dim() const { return head_dim() * kv_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws Error{kInvalidConfig} naming the first offending field.
void validate(const ModelConfig& cfg);

// FFN hidden width D * R. Throws if D * R is not an integer.
std::int64_t ffn_hidden_dim(const ModelConfig& cfg);

ModelConfig llama2_7b();
// L=24, D=1024, H=16, V=50257, N=1024.
ModelConfig gpt2_medium();

}  // namespace zomem

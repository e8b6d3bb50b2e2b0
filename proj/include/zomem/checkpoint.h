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

// Named-segment weight checkpoint.
//
// Layout (all integers and floats little-endian):
//   magic "ZOMEMCKP" (8 bytes), u32 version = 1
//   config echo: i64 context_length, num_layers, hidden_dim, num_heads,
//     kv_heads, num_mlps; f64 expansion_factor; i64 vocab_size, batch_size;
//     f64 bytes_per_param, stored_layers
//   u64 segment count, then per segment:
//     u32 name length, name bytes, u64 element count, f64 values

#pragma once

#include <string>
#include <string_view>

#include "zomem/model_config.h"
#include "zomem/parameter_vector.h"

namespace zomem {

inline constexpr std::string_view kCheckpointMagic = "ZOMEMCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParameterVector weights;
};

std::string serialize_checkpoint(const ModelConfig& cfg,
                                 const ParameterVector& weights);
// Throws Error{kIo} on a malformed buffer.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParameterVector& weights);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace zomem

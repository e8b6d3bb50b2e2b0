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

#include "zomem/model_config.h"

#include <cmath>
#include <string>

#include "zomem/error.h"

namespace zomem {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
      return "INVALID_CONFIG";
    case ErrorCode::kInvalidArgument:
      return "INVALID_ARGUMENT";
    case ErrorCode::kInfeasible:
      return "INFEASIBLE";
    case ErrorCode::kNonFiniteLoss:
      return "NONFINITE_LOSS";
    case ErrorCode::kNonFiniteGrad:
      return "NONFINITE_GRAD";
    case ErrorCode::kShapeMismatch:
      return "SHAPE_MISMATCH";
    case ErrorCode::kTokenOutOfRange:
      return "TOKEN_OUT_OF_RANGE";
    case ErrorCode::kBudgetViolation:
      return "BUDGET_VIOLATION";
    case ErrorCode::kIo:
      return "IO";
  }
  return "UNKNOWN";
}

namespace {

void require_positive(std::int64_t value, const char* field) {
  if (value < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(field) + " must be >= 1, got " +
                    std::to_string(value));
  }
}

void require_positive_real(double value, const char* field) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(field) + " must be a finite positive number, got " +
                    std::to_string(value));
  }
}

}  // namespace

void validate(const ModelConfig& cfg) {
  require_positive(cfg.context_length, "context_length");
  require_positive(cfg.num_layers, "num_layers");
  require_positive(cfg.hidden_dim, "hidden_dim");
  require_positive(cfg.num_heads, "num_heads");
  require_positive(cfg.kv_heads, "kv_heads");
  require_positive(cfg.num_mlps, "num_mlps");
  require_positive(cfg.vocab_size, "vocab_size");
  require_positive(cfg.batch_size, "batch_size");
  require_positive_real(cfg.expansion_factor, "expansion_factor");
  require_positive_real(cfg.bytes_per_param, "bytes_per_param");
  if (cfg.hidden_dim % cfg.num_heads != 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "hidden_dim " + std::to_string(cfg.hidden_dim) +
                    " is not divisible by num_heads " +
                    std::to_string(cfg.num_heads));
  }
  if (cfg.kv_heads > cfg.num_heads || cfg.num_heads % cfg.kv_heads != 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "kv_heads " + std::to_string(cfg.kv_heads) +
                    " must divide num_heads " + std::to_string(cfg.num_heads));
  }
  if (!std::isfinite(cfg.stored_layers) || cfg.stored_layers < 0.0 ||
      cfg.stored_layers > static_cast<double>(cfg.num_layers)) {
    throw Error(ErrorCode::kInvalidConfig,
                "stored_layers must lie in [0, num_layers], got " +
                    std::to_string(cfg.stored_layers));
  }
}

std::int64_t ffn_hidden_dim(const ModelConfig& cfg) {
  const double width =
      static_cast<double>(cfg.hidden_dim) * cfg.expansion_factor;
  const double rounded = std::round(width);
  if (std::abs(width - rounded) > 1e-9 * std::max(1.0, width) || rounded < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "expansion_factor: hidden_dim * expansion_factor = " +
                    std::to_string(width) + " is not a positive integer");
  }
  return static_cast<std::int64_t>(rounded);
}

ModelConfig llama2_7b() { return ModelConfig{}; }

ModelConfig gpt2_medium() {
  ModelConfig cfg;
  cfg.context_length = 1024;
  cfg.num_layers = 24;
  cfg.hidden_dim = 1024;
  cfg.num_heads = 16;
  cfg.kv_heads = 16;
  cfg.vocab_size = 50257;
  return cfg;
}

}  // namespace zomem

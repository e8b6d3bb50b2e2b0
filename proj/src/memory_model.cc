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

#include <cmath>
#include <limits>
#include <string>

#include "zomem/error.h"

namespace zomem {

std::string_view memory_mode_name(MemoryMode mode) {
  switch (mode) {
    case MemoryMode::kBp:
      return "BP";
    case MemoryMode::kBpCheckpointed:
      return "BP_CHECKPOINTED";
    case MemoryMode::kMezo:
      return "MEZO";
  }
  return "UNKNOWN";
}

std::string_view sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kContext:
      return "N";
    case SweepAxis::kLayers:
      return "L";
    case SweepAxis::kHidden:
      return "D";
  }
  return "?";
}

std::int64_t param_elements(const ModelConfig& cfg, ParamCountMode mode) {
  validate(cfg);
  const std::int64_t L = cfg.num_layers;
  const std::int64_t D = cfg.hidden_dim;
  const std::int64_t embed_head = 2 * cfg.vocab_size * D;
  if (mode == ParamCountMode::kSimplified) {
    return 12 * L * D * D + embed_head;
  }
  // W_Q and W_O are D x D; W_K and W_V shrink with grouped key/value heads.
  const std::int64_t attention = L * (2 * D * D + 2 * D * cfg.kv_dim());
  const std::int64_t ffn = cfg.num_mlps * L * D * ffn_hidden_dim(cfg);
  return attention + ffn + embed_head;
}

double activation_bytes(const ModelConfig& cfg) {
  validate(cfg);
  const double B = static_cast<double>(cfg.batch_size);
  const double L = static_cast<double>(cfg.num_layers);
  const double N = static_cast<double>(cfg.context_length);
  const double D = static_cast<double>(cfg.hidden_dim);
  const double H = static_cast<double>(cfg.num_heads);
  const double b = cfg.bytes_per_param;
  return B * L * N * D * (2.0 + 16.0 * b + (2.0 * b + 1.0) * N * H / D);
}

namespace {

// 12 b L D^2: the attention and FFN blocks of every layer.
double block_bytes(const ModelConfig& cfg) {
  const double L = static_cast<double>(cfg.num_layers);
  const double D = static_cast<double>(cfg.hidden_dim);
  return 12.0 * cfg.bytes_per_param * L * D * D;
}

// b V D: one of the embedding table or the LM head.
double vocab_matrix_bytes(const ModelConfig& cfg) {
  return cfg.bytes_per_param * static_cast<double>(cfg.vocab_size) *
         static_cast<double>(cfg.hidden_dim);
}

void total_up(MemoryBreakdown& m) {
  m.total_bytes = m.weights_bytes + m.gradients_bytes +
                  m.embedding_head_bytes + m.activations_bytes;
}

}  // namespace

MemoryBreakdown bp_memory(const ModelConfig& cfg, bool checkpointed) {
  const double full_activations = activation_bytes(cfg);
  MemoryBreakdown m;
  m.mode = checkpointed ? MemoryMode::kBpCheckpointed : MemoryMode::kBp;
  m.weights_bytes = block_bytes(cfg);
  m.gradients_bytes = block_bytes(cfg);
  m.embedding_head_bytes = 4.0 * vocab_matrix_bytes(cfg);
  if (checkpointed) {
    const double L = static_cast<double>(cfg.num_layers);
    m.activations_bytes = full_activations * std::sqrt(L) / L;
  } else {
    m.activations_bytes = full_activations;
  }
  total_up(m);
  return m;
}

MemoryBreakdown mezo_memory(const ModelConfig& cfg) {
  const double full_activations = activation_bytes(cfg);
  MemoryBreakdown m;
  m.mode = MemoryMode::kMezo;
  m.weights_bytes = block_bytes(cfg);
  m.gradients_bytes = 0.0;
  m.embedding_head_bytes = 2.0 * vocab_matrix_bytes(cfg);
  m.activations_bytes = cfg.stored_layers /
                        static_cast<double>(cfg.num_layers) * full_activations;
  total_up(m);
  return m;
}

MemoryBreakdown memory_for(const ModelConfig& cfg, MemoryMode mode) {
  switch (mode) {
    case MemoryMode::kBp:
      return bp_memory(cfg, false);
    case MemoryMode::kBpCheckpointed:
      return bp_memory(cfg, true);
    case MemoryMode::kMezo:
      return mezo_memory(cfg);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown memory mode");
}

double memory_ratio(const ModelConfig& cfg, bool checkpointed) {
  return bp_memory(cfg, checkpointed).total_bytes /
         mezo_memory(cfg).total_bytes;
}

ModelConfig with_axis_value(const ModelConfig& base, SweepAxis axis,
                            std::int64_t value) {
  ModelConfig cfg = base;
  switch (axis) {
    case SweepAxis::kContext:
      cfg.context_length = value;
      break;
    case SweepAxis::kLayers:
      cfg.num_layers = value;
      break;
    case SweepAxis::kHidden:
      cfg.hidden_dim = value;
      break;
  }
  return cfg;
}

std::vector<SweepRow> sweep(const SweepSpec& spec, bool checkpointed) {
  if (spec.values.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sweep values are empty");
  }
  for (std::size_t i = 1; i < spec.values.size(); ++i) {
    if (spec.values[i] <= spec.values[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "sweep values must be strictly increasing at value " +
                      std::to_string(spec.values[i]));
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(spec.values.size());
  for (const std::int64_t value : spec.values) {
    const ModelConfig cfg = with_axis_value(spec.base, spec.axis, value);
    try {
      validate(cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "axis " + std::string(sweep_axis_name(spec.axis)) +
                                " value " + std::to_string(value) + ": " +
                                e.message());
    }
    SweepRow row;
    row.axis_value = value;
    row.bp_total_bytes = bp_memory(cfg, checkpointed).total_bytes;
    row.mezo_total_bytes = mezo_memory(cfg).total_bytes;
    row.ratio = row.bp_total_bytes / row.mezo_total_bytes;
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct AxisLattice {
  std::int64_t first = 1;
  std::int64_t step = 1;

  std::int64_t at(std::int64_t k) const { return first + (k - 1) * step; }
};

constexpr std::int64_t kMaxLatticeIndex = std::int64_t{1} << 40;

}  // namespace

MaxDimensionResult max_dimension(double budget_bytes, const ModelConfig& cfg,
                                 FreeAxis free_axis, MemoryMode mode) {
  if (!std::isfinite(budget_bytes) || budget_bytes <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "budget must be a finite positive byte count");
  }
  validate(cfg);

  AxisLattice lattice;
  if (free_axis == FreeAxis::kHidden) {
    lattice = {cfg.num_heads, cfg.num_heads};
  } else {
    const auto min_layers = static_cast<std::int64_t>(
        std::max(1.0, std::ceil(cfg.stored_layers)));
    lattice = {min_layers, 1};
  }
  auto config_at = [&](std::int64_t k) {
    ModelConfig c = cfg;
    if (free_axis == FreeAxis::kHidden) {
      c.hidden_dim = lattice.at(k);
    } else {
      c.num_layers = lattice.at(k);
    }
    return c;
  };
  auto fits = [&](std::int64_t k) {
    return memory_for(config_at(k), mode).total_bytes <= budget_bytes;
  };

  if (!fits(1)) {
    throw Error(ErrorCode::kInfeasible,
                "budget of " + std::to_string(budget_bytes) +
                    " bytes is below the memory needed at the smallest "
                    "admissible value " +
                    std::to_string(lattice.at(1)));
  }
  // Invariant: fits(lo) and !fits(hi).
  std::int64_t lo = 1;
  std::int64_t hi = 2;
  while (fits(hi)) {
    lo = hi;
    if (hi >= kMaxLatticeIndex) {
      throw Error(ErrorCode::kInvalidArgument,
                  "budget is too large to bound the search");
    }
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  MaxDimensionResult result;
  result.config = config_at(lo);
  result.value = lattice.at(lo);
  result.breakdown = memory_for(result.config, mode);
  return result;
}

}  // namespace zomem

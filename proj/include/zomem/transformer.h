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

// Desk-scale decoder-only transformer in double precision with an exact
// hand-written backward pass.
//
// Per layer: RMSNorm -> causal multi-head attention with RoPE (grouped
// key/value heads when kv_heads < num_heads) -> residual -> RMSNorm -> FFN ->
// residual. A final RMSNorm feeds an untied LM head. The FFN uses
// num_mlps == 2 (up/down with tanh-GELU) or num_mlps == 3 (SwiGLU).
//
// Matrices are stored row-major as (fan_in x fan_out), so y = x W. The
// embedding table and LM head are (vocab x hidden).

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zomem/model_config.h"
#include "zomem/parameter_vector.h"

namespace zomem {

inline constexpr double kRmsNormEps = 1e-6;
inline constexpr double kRopeBase = 10000.0;
// Target value that is excluded from the loss.
inline constexpr std::int32_t kIgnoreTarget = -1;

// Throws Error{kInvalidConfig} for configs the toy model cannot run: odd head
// dimension, num_mlps outside {2, 3}, or a non-integral FFN width.
void validate_toy_config(const ModelConfig& cfg);

// Zero-initialized parameters with the model's named-segment layout:
//   embed, layers.<l>.{attn_norm, wq, wk, wv, wo, ffn_norm, w_gate?, w_up,
//   w_down}, final_norm, lm_head
ParameterVector make_transformer_parameters(const ModelConfig& cfg);

// Matrices ~ N(0, 1/D), norm gains = 1, fixed by seed.
void init_transformer_weights(ParameterVector& weights, const ModelConfig& cfg,
                              std::uint64_t seed);

// Number of RMSNorm gain elements: (2 L + 1) D.
std::int64_t norm_gain_elements(const ModelConfig& cfg);

// Size of make_transformer_parameters(cfg).
std::int64_t trainable_elements(const ModelConfig& cfg);

struct TokenBatch {
  std::int64_t batch = 0;
  std::int64_t seq_len = 0;
  std::vector<std::int32_t> tokens;  // batch * seq_len, row-major
};

enum class LedgerMode { kBp, kMezo };

// Elements held by a forward pass. Per-layer categories are summed over the
// layers whose caches are retained: all of them in BP mode, the most recent
// ceil(stored_layers) in MeZO mode. Embedding output and logits are counted
// once in both modes.
struct ActivationLedger {
  LedgerMode mode = LedgerMode::kBp;
  std::int64_t retained_layers = 0;
  std::int64_t embeddings_elements = 0;
  std::int64_t attention_proj_elements = 0;
  std::int64_t attention_scores_elements = 0;
  std::int64_t ffn_elements = 0;
  std::int64_t norm_elements = 0;
  std::int64_t logits_elements = 0;

  std::int64_t per_layer_elements() const {
    return attention_proj_elements + attention_scores_elements +
           ffn_elements + norm_elements;
  }

  friend bool operator==(const ActivationLedger&,
                         const ActivationLedger&) = default;
};

struct ForwardResult {
  std::vector<double> logits;  // batch * seq_len * vocab
  ActivationLedger ledger;
};

// Throws Error{kTokenOutOfRange} or Error{kShapeMismatch}.
ForwardResult forward(const ModelConfig& cfg, const ParameterVector& weights,
                      const TokenBatch& input, LedgerMode mode);

// Causal attention probabilities of one layer, (batch * heads * seq_len) x
// seq_len row-major; entries above the diagonal are zero.
std::vector<double> attention_probabilities(const ModelConfig& cfg,
                                            const ParameterVector& weights,
                                            const TokenBatch& input,
                                            std::int64_t layer);

// Mean cross-entropy over positions whose target is not kIgnoreTarget.
double cross_entropy(std::span<const double> logits, std::int64_t vocab_size,
                     std::span<const std::int32_t> targets);

struct BackwardResult {
  double loss = 0.0;
  ParameterVector gradient;
  ActivationLedger ledger;  // BP mode
};

// Exact gradient of cross_entropy(forward(weights, input), targets).
BackwardResult backward(const ModelConfig& cfg, const ParameterVector& weights,
                        const TokenBatch& input,
                        std::span<const std::int32_t> targets);

// Structural comparison of a BP-mode ledger with the activation formula:
// score storage is B L H N^2 and the remaining per-layer storage is
// proportional to B L N D.
struct LedgerReport {
  std::int64_t expected_scores_elements = 0;
  bool scores_exact = false;
  // (proj + ffn + norm) / (B L N D).
  double per_layer_constant = 0.0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

LedgerReport ledger_check(const ModelConfig& cfg,
                          const ActivationLedger& ledger);

// Compares ledgers of two configs that differ by doubling context_length or
// hidden_dim (and nothing else). Scores must scale by 4 (N) or 1 (D); every
// other per-layer category by exactly 2.
LedgerReport ledger_scaling_check(const ModelConfig& base_cfg,
                                  const ActivationLedger& base,
                                  const ModelConfig& doubled_cfg,
                                  const ActivationLedger& doubled);

}  // namespace zomem

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

// Deterministic synthetic sequence tasks for desk-scale fine-tuning runs.
//
// Every example is a pure function of (task, index). Training examples use
// indices [0, kEvalIndexBase) and evaluation examples start at
// kEvalIndexBase, so the two splits never overlap.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "zomem/transformer.h"

namespace zomem {

enum class TaskKind {
  // c_1..c_m SEP c_1..c_m; score the copied half.
  kSequenceCopy,
  // Walks of a sparse seed-derived Markov chain; score every next token.
  kNextTokenSynthetic,
  // c_1..c_k QUERY q; answer YES iff q occurs among c_1..c_k.
  kBinaryQaSynthetic,
};

std::string_view task_kind_name(TaskKind kind);
// Accepts "sequence_copy", "next_token", "binary_qa". Throws.
TaskKind parse_task_kind(std::string_view name);

struct ToyTask {
  TaskKind kind = TaskKind::kSequenceCopy;
  std::int64_t vocab_size = 16;
  std::int64_t seq_len = 9;
  std::uint64_t seed = 0;
  // Targets are emitted as (token + label_shift) mod vocab_size. Two tasks
  // that differ only here share inputs but need a different readout.
  std::int64_t label_shift = 0;
};

inline constexpr std::uint64_t kEvalIndexBase = std::uint64_t{1} << 62;

// Reserved tokens.
inline constexpr std::int32_t kSeparatorToken = 0;
inline constexpr std::int32_t kNoToken = 1;
inline constexpr std::int32_t kYesToken = 2;
inline constexpr std::int32_t kQueryToken = 0;

// Throws Error{kInvalidConfig} if the task cannot be generated.
void validate(const ToyTask& task);

struct LabeledBatch {
  TokenBatch input;
  std::vector<std::int32_t> targets;  // kIgnoreTarget where unscored
};

// Examples first_index .. first_index + count - 1.
LabeledBatch make_batch(const ToyTask& task, std::uint64_t first_index,
                        std::int64_t count);

// Fraction of scored predictions that are correct. Copy and next-token tasks
// take the argmax over the vocabulary; the QA task compares the YES and NO
// label logits at the answer position.
double accuracy(const ToyTask& task, std::span<const double> logits,
                const LabeledBatch& batch);

// Accuracy of always answering with the more frequent label, or 1/vocab for
// the token tasks; used to report "above chance".
double chance_accuracy(const ToyTask& task);

}  // namespace zomem

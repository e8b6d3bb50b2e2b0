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

#include "zomem/toy_task.h"

#include <algorithm>
#include <random>
#include <string>

#include "zomem/error.h"
#include "zomem/noise.h"

namespace zomem {

namespace {

constexpr double kMarkovMainProbability = 0.75;

std::int32_t shifted(const ToyTask& task, std::int64_t token) {
  return static_cast<std::int32_t>((token + task.label_shift) %
                                   task.vocab_size);
}

std::int64_t draw(std::mt19937_64& rng, std::int64_t n) {
  return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
}

double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Two successors per token; the first is taken with kMarkovMainProbability.
struct MarkovChain {
  std::vector<std::int64_t> main, alt;
};

MarkovChain make_chain(const ToyTask& task) {
  std::mt19937_64 rng(mix_seed(task.seed, 0x6d61726b6f76ull));
  MarkovChain chain;
  for (std::int64_t t = 0; t < task.vocab_size; ++t) {
    chain.main.push_back(draw(rng, task.vocab_size));
    chain.alt.push_back(draw(rng, task.vocab_size));
  }
  return chain;
}

void fill_example(const ToyTask& task, const MarkovChain* chain,
                  std::uint64_t index, std::span<std::int32_t> x,
                  std::span<std::int32_t> y) {
  std::mt19937_64 rng(mix_seed(task.seed, index));
  const std::int64_t S = task.seq_len;
  std::fill(y.begin(), y.end(), kIgnoreTarget);
  switch (task.kind) {
    case TaskKind::kSequenceCopy: {
      const std::int64_t m = S / 2;
      for (std::int64_t j = 0; j < m; ++j) {
        const auto c = static_cast<std::int32_t>(1 + draw(rng, task.vocab_size - 1));
        x[j] = c;
        y[m + j] = shifted(task, c);
        x[m + 1 + j] = y[m + j];
      }
      x[m] = kSeparatorToken;
      break;
    }
    case TaskKind::kNextTokenSynthetic: {
      std::int64_t token = draw(rng, task.vocab_size);
      for (std::int64_t t = 0; t < S; ++t) {
        x[t] = static_cast<std::int32_t>(token);
        const bool main = draw_unit(rng) < kMarkovMainProbability;
        token = main ? chain->main[token] : chain->alt[token];
        if (t + 1 < S) {
          y[t] = shifted(task, token);
        }
      }
      break;
    }
    case TaskKind::kBinaryQaSynthetic: {
      const std::int64_t k = S - 2;
      const std::int64_t content = task.vocab_size - 3;
      for (std::int64_t j = 0; j < k; ++j) {
        x[j] = static_cast<std::int32_t>(3 + draw(rng, content));
      }
      const auto present = [&](std::int64_t token) {
        return std::find(x.begin(), x.begin() + k, token) != x.begin() + k;
      };
      const bool yes = (rng() & 1) != 0;
      std::int64_t query = 0;
      if (yes) {
        query = x[draw(rng, k)];
      } else {
        do {
          query = 3 + draw(rng, content);
        } while (present(query));
      }
      x[k] = kQueryToken;
      x[k + 1] = static_cast<std::int32_t>(query);
      y[k + 1] = shifted(task, yes ? kYesToken : kNoToken);
      break;
    }
  }
}

}  // namespace

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSequenceCopy:
      return "sequence_copy";
    case TaskKind::kNextTokenSynthetic:
      return "next_token";
    case TaskKind::kBinaryQaSynthetic:
      return "binary_qa";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (const TaskKind k :
       {TaskKind::kSequenceCopy, TaskKind::kNextTokenSynthetic,
        TaskKind::kBinaryQaSynthetic}) {
    if (task_kind_name(k) == name) {
      return k;
    }
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown task kind '" + std::string(name) + "'");
}

void validate(const ToyTask& task) {
  if (task.vocab_size < 4) {
    throw Error(ErrorCode::kInvalidConfig, "task vocab_size must be >= 4");
  }
  if (task.label_shift < 0 || task.label_shift >= task.vocab_size) {
    throw Error(ErrorCode::kInvalidConfig,
                "label_shift must lie in [0, vocab_size)");
  }
  switch (task.kind) {
    case TaskKind::kSequenceCopy:
      if (task.seq_len < 3 || task.seq_len % 2 == 0) {
        throw Error(ErrorCode::kInvalidConfig,
                    "sequence_copy needs an odd seq_len >= 3");
      }
      break;
    case TaskKind::kNextTokenSynthetic:
      if (task.seq_len < 2) {
        throw Error(ErrorCode::kInvalidConfig, "next_token needs seq_len >= 2");
      }
      break;
    case TaskKind::kBinaryQaSynthetic:
      if (task.seq_len < 3 || task.vocab_size - 3 < task.seq_len - 1) {
        throw Error(ErrorCode::kInvalidConfig,
                    "binary_qa needs seq_len >= 3 and more content tokens "
                    "(vocab_size - 3) than context positions (seq_len - 2)");
      }
      break;
  }
}

LabeledBatch make_batch(const ToyTask& task, std::uint64_t first_index,
                        std::int64_t count) {
  validate(task);
  if (count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch count must be >= 1");
  }
  LabeledBatch batch;
  batch.input.batch = count;
  batch.input.seq_len = task.seq_len;
  const auto total = static_cast<std::size_t>(count * task.seq_len);
  batch.input.tokens.assign(total, 0);
  batch.targets.assign(total, kIgnoreTarget);
  MarkovChain chain;
  if (task.kind == TaskKind::kNextTokenSynthetic) {
    chain = make_chain(task);
  }
  const auto S = static_cast<std::size_t>(task.seq_len);
  for (std::int64_t e = 0; e < count; ++e) {
    const std::size_t at = static_cast<std::size_t>(e) * S;
    fill_example(task, &chain, first_index + static_cast<std::uint64_t>(e),
                 std::span(batch.input.tokens).subspan(at, S),
                 std::span(batch.targets).subspan(at, S));
  }
  return batch;
}

double accuracy(const ToyTask& task, std::span<const double> logits,
                const LabeledBatch& batch) {
  const auto V = static_cast<std::size_t>(task.vocab_size);
  if (logits.size() != batch.targets.size() * V) {
    throw Error(ErrorCode::kShapeMismatch,
                "logits do not match the batch shape");
  }
  std::int64_t scored = 0;
  std::int64_t correct = 0;
  for (std::size_t r = 0; r < batch.targets.size(); ++r) {
    const std::int32_t target = batch.targets[r];
    if (target == kIgnoreTarget) {
      continue;
    }
    const auto row = logits.subspan(r * V, V);
    ++scored;
    if (task.kind == TaskKind::kBinaryQaSynthetic) {
      const std::int32_t yes = shifted(task, kYesToken);
      const std::int32_t no = shifted(task, kNoToken);
      const std::int32_t other = target == yes ? no : yes;
      correct += row[static_cast<std::size_t>(target)] >
                         row[static_cast<std::size_t>(other)]
                     ? 1
                     : 0;
    } else {
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      correct += best == target ? 1 : 0;
    }
  }
  if (scored == 0) {
    throw Error(ErrorCode::kShapeMismatch, "batch has no scored positions");
  }
  return static_cast<double>(correct) / static_cast<double>(scored);
}

double chance_accuracy(const ToyTask& task) {
  switch (task.kind) {
    case TaskKind::kSequenceCopy:
      return 1.0 / static_cast<double>(task.vocab_size - 1);
    case TaskKind::kNextTokenSynthetic:
      return 1.0 / static_cast<double>(task.vocab_size);
    case TaskKind::kBinaryQaSynthetic:
      return 0.5;
  }
  return 0.0;
}

}  // namespace zomem

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

// Matched-budget fine-tuning runs: BP on a small toy transformer against
// MeZO on a larger one, with a learning-rate grid per method and periodic
// evaluation on a held-out split.
//
// Each model is first pretrained with exact-gradient SGD on the task with
// pretrain_label_shift; fine-tuning then uses task.label_shift. Pretraining
// cost is outside the recorded wall clock.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zomem/model_config.h"
#include "zomem/toy_task.h"
#include "zomem/zo_core.h"

namespace zomem {

enum class Method { kBp, kMezo };

std::string_view method_name(Method method);  // "BP", "MEZO"
Method parse_method(std::string_view name);

// Which segments fine-tuning updates. kHead is the LM head alone.
enum class FineTuneScope { kAll, kHead };

std::string_view scope_name(FineTuneScope scope);  // "all", "head"
FineTuneScope parse_scope(std::string_view name);

struct ExperimentPlan {
  double budget_bytes = 0.0;
  ModelConfig bp_model;
  ModelConfig mezo_model;
  ToyTask task;
  std::int64_t steps = 0;
  std::int64_t eval_every = 1;
  std::int64_t eval_examples = 256;
  std::vector<double> lr_grid_bp;
  std::vector<double> lr_grid_mezo;
  ZOConfig zo;
  std::uint64_t run_seed = 0;
  FineTuneScope scope = FineTuneScope::kAll;
  std::int64_t pretrain_steps = 0;
  double pretrain_learning_rate = 0.1;
  std::int64_t pretrain_label_shift = 0;
};

// Largest allowed relative gap between the two analytic totals.
inline constexpr double kMatchedBudgetTolerance = 0.15;

struct BudgetCheck {
  double bp_total_bytes = 0.0;
  double mezo_total_bytes = 0.0;
  std::int64_t bp_params = 0;
  std::int64_t mezo_params = 0;
  // |bp - mezo| / max(bp, mezo).
  double relative_gap = 0.0;
};

// Throws Error{kBudgetViolation} unless both totals fit the budget, lie
// within kMatchedBudgetTolerance of each other, and the MeZO model has
// strictly more parameters. Other plan fields are checked as well
// (kInvalidConfig).
BudgetCheck validate(const ExperimentPlan& plan);

struct RunPoint {
  std::int64_t step = 0;
  double wall_clock_seconds = 0.0;
  double cpu_seconds = 0.0;  // informational, not emitted
  double train_loss = 0.0;
  double eval_accuracy = 0.0;
  double running_max_accuracy = 0.0;
};

struct RunRecord {
  Method method = Method::kBp;
  double learning_rate = 0.0;
  std::vector<RunPoint> points;
  bool failed = false;
  std::string failure;
};

// Runs every (method, learning rate) pair in grid order: BP first, then
// MeZO. A non-finite loss ends that run with failed = true and keeps the
// points recorded so far.
std::vector<RunRecord> run_experiment(const ExperimentPlan& plan);

// One (method, lr) run; exposed for tests.
RunRecord run_single(const ExperimentPlan& plan, Method method,
                     double learning_rate);

struct MethodSummary {
  Method method = Method::kBp;
  double best_learning_rate = 0.0;
  double initial_accuracy = 0.0;
  double plateau_accuracy = 0.0;  // final running max of the best run
  // First evaluated step whose running max reaches 90% of the plateau.
  std::int64_t steps_to_90_percent = 0;
  double wall_clock_seconds = 0.0;
  int failed_runs = 0;
};

// Best run per method by final running-max accuracy; ties keep the earlier
// grid entry. Throws Error{kInvalidArgument} if a method has no records.
MethodSummary summarize(const std::vector<RunRecord>& records, Method method);

inline constexpr std::string_view kCsvHeader =
    "method,learning_rate,step,wall_clock_s,train_loss,eval_accuracy,"
    "running_max_accuracy";

// Header plus one row per point, sorted by (method, learning_rate, step).
// Numbers use the shortest round-trip representation.
std::string emit_csv(const std::vector<RunRecord>& records);

// Inverse of emit_csv. The failed flag is not stored and reads back false.
std::vector<RunRecord> parse_csv(std::string_view text);

// Single-thread timings of one forward pass and one optimizer step on a
// training batch, averaged over repeats.
struct StepCost {
  double forward_seconds = 0.0;
  double mezo_step_seconds = 0.0;
  double bp_step_seconds = 0.0;
};

StepCost measure_step_cost(const ExperimentPlan& plan, int repeats);

}  // namespace zomem

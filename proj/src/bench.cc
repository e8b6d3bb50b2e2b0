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

#include "zomem/bench.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <optional>
#include <tuple>

#include <fmt/format.h>

#include "zomem/error.h"
#include "zomem/memory_model.h"
#include "zomem/transformer.h"

namespace zomem {

namespace {

// Pretraining examples come from their own index range, below the
// evaluation split and far above any fine-tuning index.
constexpr std::uint64_t kPretrainIndexBase = std::uint64_t{1} << 61;

// Salts for deriving per-purpose seeds from run_seed.
constexpr std::uint64_t kBpInitSalt = 1;
constexpr std::uint64_t kMezoInitSalt = 2;
constexpr std::uint64_t kPerturbationSalt = 3;

const ModelConfig& model_for(const ExperimentPlan& plan, Method method) {
  return method == Method::kBp ? plan.bp_model : plan.mezo_model;
}

LabeledBatch training_batch(const ToyTask& task, const ModelConfig& cfg,
                            std::uint64_t base, std::int64_t step) {
  return make_batch(task,
                    base + static_cast<std::uint64_t>(step) *
                               static_cast<std::uint64_t>(cfg.batch_size),
                    cfg.batch_size);
}

double batch_loss(const ModelConfig& cfg, const ParameterVector& weights,
                  const LabeledBatch& batch) {
  return cross_entropy(
      forward(cfg, weights, batch.input, LedgerMode::kMezo).logits,
      cfg.vocab_size, batch.targets);
}

ParameterVector pretrained_weights(const ExperimentPlan& plan, Method method) {
  const ModelConfig& cfg = model_for(plan, method);
  ParameterVector weights = make_transformer_parameters(cfg);
  init_transformer_weights(
      weights, cfg,
      mix_seed(plan.run_seed,
               method == Method::kBp ? kBpInitSalt : kMezoInitSalt));
  ToyTask task = plan.task;
  task.label_shift = plan.pretrain_label_shift;
  for (std::int64_t step = 0; step < plan.pretrain_steps; ++step) {
    const LabeledBatch batch =
        training_batch(task, cfg, kPretrainIndexBase, step);
    bp_sgd_step(
        [&](const ParameterVector& w, ParameterVector& grad) {
          BackwardResult r = backward(cfg, w, batch.input, batch.targets);
          grad = std::move(r.gradient);
          return r.loss;
        },
        weights, plan.pretrain_learning_rate);
  }
  return weights;
}

// The trainable slice of the weights and the mapping back into them.
class Trainable {
 public:
  Trainable(ParameterVector weights, FineTuneScope scope)
      : weights_(std::move(weights)), scope_(scope) {
    if (scope_ == FineTuneScope::kHead) {
      const auto head = weights_.segment("lm_head");
      theta_.add_segment("lm_head", head.size());
      std::copy(head.begin(), head.end(), theta_.values().begin());
    }
  }

  ParameterVector& theta() {
    return scope_ == FineTuneScope::kAll ? weights_ : theta_;
  }

  // Full weights with theta written in.
  const ParameterVector& weights_with(const ParameterVector& theta) {
    if (scope_ == FineTuneScope::kAll) {
      return theta;
    }
    const auto src = theta.values();
    std::copy(src.begin(), src.end(), weights_.segment("lm_head").begin());
    return weights_;
  }

  // Restricts a full-model gradient to theta's layout.
  void project_gradient(ParameterVector& full, ParameterVector& out) const {
    if (scope_ == FineTuneScope::kAll) {
      out = std::move(full);
      return;
    }
    const auto head = full.segment("lm_head");
    std::copy(head.begin(), head.end(), out.values().begin());
  }

 private:
  ParameterVector weights_;
  ParameterVector theta_;
  FineTuneScope scope_;
};

double process_cpu_seconds() {
  return static_cast<double>(std::clock()) / CLOCKS_PER_SEC;
}

void check_positive(std::int64_t value, const char* name) {
  if (value < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("{} must be >= 1, got {}", name, value));
  }
}

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("{} must list at least one learning rate", name));
  }
  for (const double lr : grid) {
    if (!std::isfinite(lr) || lr < 0.0) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("{} entry {} is not a finite rate >= 0", name, lr));
    }
  }
}

}  // namespace

std::string_view method_name(Method method) {
  return method == Method::kBp ? "BP" : "MEZO";
}

Method parse_method(std::string_view name) {
  if (name == "BP") {
    return Method::kBp;
  }
  if (name == "MEZO") {
    return Method::kMezo;
  }
  throw Error(ErrorCode::kInvalidArgument,
              fmt::format("unknown method '{}'", name));
}

std::string_view scope_name(FineTuneScope scope) {
  return scope == FineTuneScope::kAll ? "all" : "head";
}

FineTuneScope parse_scope(std::string_view name) {
  if (name == "all") {
    return FineTuneScope::kAll;
  }
  if (name == "head") {
    return FineTuneScope::kHead;
  }
  throw Error(ErrorCode::kInvalidConfig,
              fmt::format("unknown fine-tune scope '{}'", name));
}

BudgetCheck validate(const ExperimentPlan& plan) {
  validate(plan.task);
  validate_toy_config(plan.bp_model);
  validate_toy_config(plan.mezo_model);
  validate(plan.zo);
  for (const ModelConfig* cfg : {&plan.bp_model, &plan.mezo_model}) {
    if (cfg->vocab_size != plan.task.vocab_size) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("model vocab_size {} differs from task vocab {}",
                              cfg->vocab_size, plan.task.vocab_size));
    }
    if (cfg->context_length < plan.task.seq_len) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("context_length {} is shorter than task seq_len {}",
                              cfg->context_length, plan.task.seq_len));
    }
  }
  if (plan.steps < 0) {
    throw Error(ErrorCode::kInvalidConfig, "steps must be >= 0");
  }
  if (plan.pretrain_steps < 0) {
    throw Error(ErrorCode::kInvalidConfig, "pretrain_steps must be >= 0");
  }
  check_positive(plan.eval_every, "eval_every");
  check_positive(plan.eval_examples, "eval_examples");
  check_grid(plan.lr_grid_bp, "lr_grid_bp");
  check_grid(plan.lr_grid_mezo, "lr_grid_mezo");
  if (!(plan.pretrain_learning_rate >= 0.0) ||
      !std::isfinite(plan.pretrain_learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig,
                "pretrain_learning_rate must be finite and >= 0");
  }
  if (plan.pretrain_label_shift < 0 ||
      plan.pretrain_label_shift >= plan.task.vocab_size) {
    throw Error(ErrorCode::kInvalidConfig,
                "pretrain_label_shift must lie in [0, vocab_size)");
  }

  BudgetCheck check;
  check.bp_total_bytes = bp_memory(plan.bp_model, false).total_bytes;
  check.mezo_total_bytes = mezo_memory(plan.mezo_model).total_bytes;
  check.bp_params = param_elements(plan.bp_model, ParamCountMode::kGeneric);
  check.mezo_params = param_elements(plan.mezo_model, ParamCountMode::kGeneric);
  check.relative_gap =
      std::abs(check.bp_total_bytes - check.mezo_total_bytes) /
      std::max(check.bp_total_bytes, check.mezo_total_bytes);
  if (!(plan.budget_bytes > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "budget_bytes must be > 0");
  }
  if (check.bp_total_bytes > plan.budget_bytes) {
    throw Error(ErrorCode::kBudgetViolation,
                fmt::format("BP model needs {} bytes, budget is {}",
                            check.bp_total_bytes, plan.budget_bytes));
  }
  if (check.mezo_total_bytes > plan.budget_bytes) {
    throw Error(ErrorCode::kBudgetViolation,
                fmt::format("MeZO model needs {} bytes, budget is {}",
                            check.mezo_total_bytes, plan.budget_bytes));
  }
  if (check.relative_gap > kMatchedBudgetTolerance) {
    throw Error(ErrorCode::kBudgetViolation,
                fmt::format("analytic totals {} (BP) and {} (MeZO) differ by "
                            "{:.1f}%, more than {:.0f}%",
                            check.bp_total_bytes, check.mezo_total_bytes,
                            100 * check.relative_gap,
                            100 * kMatchedBudgetTolerance));
  }
  if (check.mezo_params <= check.bp_params) {
    throw Error(ErrorCode::kBudgetViolation,
                fmt::format("MeZO model has {} parameters, not more than the "
                            "BP model's {}",
                            check.mezo_params, check.bp_params));
  }
  return check;
}

namespace {

RunRecord run_from(const ExperimentPlan& plan, Method method,
                   double learning_rate, ParameterVector start) {
  const ModelConfig& cfg = model_for(plan, method);
  const LabeledBatch eval_batch =
      make_batch(plan.task, kEvalIndexBase, plan.eval_examples);
  Trainable trainable(std::move(start), plan.scope);
  ParameterVector& theta = trainable.theta();

  ZOConfig zo = plan.zo;
  zo.learning_rate = learning_rate;
  zo.master_seed = mix_seed(plan.run_seed, kPerturbationSalt);

  RunRecord record;
  record.method = method;
  record.learning_rate = learning_rate;
  double wall = 0.0;
  double cpu = 0.0;
  double running_max = 0.0;

  auto evaluate = [&](std::int64_t step) {
    const ParameterVector& w = trainable.weights_with(theta);
    RunPoint p;
    p.step = step;
    p.wall_clock_seconds = wall;
    p.cpu_seconds = cpu;
    p.train_loss =
        batch_loss(cfg, w, training_batch(plan.task, cfg, 0, step));
    p.eval_accuracy = accuracy(
        plan.task,
        forward(cfg, w, eval_batch.input, LedgerMode::kMezo).logits,
        eval_batch);
    running_max = std::max(running_max, p.eval_accuracy);
    p.running_max_accuracy = running_max;
    record.points.push_back(p);
  };

  try {
    evaluate(0);
    for (std::int64_t step = 0; step < plan.steps; ++step) {
      const LabeledBatch batch = training_batch(plan.task, cfg, 0, step);
      const auto wall_start = std::chrono::steady_clock::now();
      const double cpu_start = process_cpu_seconds();
      if (method == Method::kMezo) {
        mezo_step(
            [&](const ParameterVector& t) {
              return batch_loss(cfg, trainable.weights_with(t), batch);
            },
            theta, zo, static_cast<std::uint64_t>(step));
      } else {
        bp_sgd_step(
            [&](const ParameterVector& t, ParameterVector& grad) {
              BackwardResult r = backward(cfg, trainable.weights_with(t),
                                          batch.input, batch.targets);
              trainable.project_gradient(r.gradient, grad);
              return r.loss;
            },
            theta, learning_rate);
      }
      cpu += process_cpu_seconds() - cpu_start;
      wall += std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            wall_start)
                  .count();
      const std::int64_t done = step + 1;
      if (done % plan.eval_every == 0 || done == plan.steps) {
        evaluate(done);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFiniteLoss &&
        e.code() != ErrorCode::kNonFiniteGrad &&
        !(method == Method::kMezo &&
          e.code() == ErrorCode::kInvalidArgument)) {
      throw;
    }
    record.failed = true;
    record.failure = e.what();
  }
  return record;
}

}  // namespace

RunRecord run_single(const ExperimentPlan& plan, Method method,
                     double learning_rate) {
  validate(plan);
  return run_from(plan, method, learning_rate,
                  pretrained_weights(plan, method));
}

std::vector<RunRecord> run_experiment(const ExperimentPlan& plan) {
  validate(plan);
  std::vector<RunRecord> records;
  for (const Method method : {Method::kBp, Method::kMezo}) {
    const ParameterVector start = pretrained_weights(plan, method);
    const auto& grid =
        method == Method::kBp ? plan.lr_grid_bp : plan.lr_grid_mezo;
    for (const double lr : grid) {
      records.push_back(run_from(plan, method, lr, start));
    }
  }
  return records;
}

MethodSummary summarize(const std::vector<RunRecord>& records, Method method) {
  const RunRecord* best = nullptr;
  MethodSummary s;
  s.method = method;
  for (const RunRecord& r : records) {
    if (r.method != method || r.points.empty()) {
      continue;
    }
    if (r.failed) {
      ++s.failed_runs;
    }
    if (best == nullptr || r.points.back().running_max_accuracy >
                               best->points.back().running_max_accuracy) {
      best = &r;
    }
  }
  if (best == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("no records for method {}", method_name(method)));
  }
  s.best_learning_rate = best->learning_rate;
  s.initial_accuracy = best->points.front().eval_accuracy;
  s.plateau_accuracy = best->points.back().running_max_accuracy;
  s.wall_clock_seconds = best->points.back().wall_clock_seconds;
  for (const RunPoint& p : best->points) {
    if (p.running_max_accuracy >= 0.9 * s.plateau_accuracy) {
      s.steps_to_90_percent = p.step;
      break;
    }
  }
  return s;
}

std::string emit_csv(const std::vector<RunRecord>& records) {
  std::vector<const RunRecord*> order;
  for (const RunRecord& r : records) {
    order.push_back(&r);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const RunRecord* a, const RunRecord* b) {
                     return std::make_tuple(method_name(a->method),
                                            a->learning_rate) <
                            std::make_tuple(method_name(b->method),
                                            b->learning_rate);
                   });
  std::string out(kCsvHeader);
  out += '\n';
  for (const RunRecord* r : order) {
    std::vector<RunPoint> points = r->points;
    std::stable_sort(points.begin(), points.end(),
                     [](const RunPoint& a, const RunPoint& b) {
                       return a.step < b.step;
                     });
    for (const RunPoint& p : points) {
      out += fmt::format("{},{},{},{},{},{},{}\n", method_name(r->method),
                         r->learning_rate, p.step, p.wall_clock_seconds,
                         p.train_loss, p.eval_accuracy,
                         p.running_max_accuracy);
    }
  }
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view field, std::size_t line) {
  T value{};
  const auto [end, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("line {}: cannot parse '{}'", line, field));
  }
  return value;
}

}  // namespace

std::vector<RunRecord> parse_csv(std::string_view text) {
  std::vector<RunRecord> records;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw Error(ErrorCode::kInvalidArgument, "unexpected CSV header");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string_view> f;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    if (f.size() != 7) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("line {}: expected 7 fields, got {}", line_no,
                              f.size()));
    }
    const Method method = parse_method(f[0]);
    const double lr = parse_number<double>(f[1], line_no);
    if (records.empty() || records.back().method != method ||
        records.back().learning_rate != lr) {
      records.push_back(RunRecord{method, lr, {}, false, {}});
    }
    RunPoint p;
    p.step = parse_number<std::int64_t>(f[2], line_no);
    p.wall_clock_seconds = parse_number<double>(f[3], line_no);
    p.train_loss = parse_number<double>(f[4], line_no);
    p.eval_accuracy = parse_number<double>(f[5], line_no);
    p.running_max_accuracy = parse_number<double>(f[6], line_no);
    records.back().points.push_back(p);
  }
  if (!header_seen) {
    throw Error(ErrorCode::kInvalidArgument, "empty CSV");
  }
  return records;
}

StepCost measure_step_cost(const ExperimentPlan& plan, int repeats) {
  validate(plan);
  if (repeats < 1) {
    throw Error(ErrorCode::kInvalidArgument, "repeats must be >= 1");
  }
  using Clock = std::chrono::steady_clock;
  auto seconds_since = [](Clock::time_point t) {
    return std::chrono::duration<double>(Clock::now() - t).count();
  };
  StepCost cost;
  {
    const ModelConfig& cfg = plan.mezo_model;
    ParameterVector w = make_transformer_parameters(cfg);
    init_transformer_weights(w, cfg, plan.run_seed);
    const LabeledBatch batch = training_batch(plan.task, cfg, 0, 0);
    auto t = Clock::now();
    for (int i = 0; i < repeats; ++i) {
      batch_loss(cfg, w, batch);
    }
    cost.forward_seconds = seconds_since(t) / repeats;
    Trainable trainable(w, plan.scope);
    ZOConfig zo = plan.zo;
    zo.learning_rate = 0.0;
    t = Clock::now();
    for (int i = 0; i < repeats; ++i) {
      mezo_step(
          [&](const ParameterVector& th) {
            return batch_loss(cfg, trainable.weights_with(th), batch);
          },
          trainable.theta(), zo, static_cast<std::uint64_t>(i));
    }
    cost.mezo_step_seconds = seconds_since(t) / repeats;
  }
  {
    const ModelConfig& cfg = plan.bp_model;
    ParameterVector w = make_transformer_parameters(cfg);
    init_transformer_weights(w, cfg, plan.run_seed);
    const LabeledBatch batch = training_batch(plan.task, cfg, 0, 0);
    Trainable trainable(w, plan.scope);
    const auto t = Clock::now();
    for (int i = 0; i < repeats; ++i) {
      bp_sgd_step(
          [&](const ParameterVector& th, ParameterVector& grad) {
            BackwardResult r = backward(cfg, trainable.weights_with(th),
                                        batch.input, batch.targets);
            trainable.project_gradient(r.gradient, grad);
            return r.loss;
          },
          trainable.theta(), 0.0);
    }
    cost.bp_step_seconds = seconds_since(t) / repeats;
  }
  return cost;
}

}  // namespace zomem

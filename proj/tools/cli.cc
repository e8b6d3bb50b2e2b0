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

#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "zomem/bench.h"
#include "zomem/config_file.h"
#include "zomem/error.h"
#include "zomem/memory_model.h"
#include "zomem/units.h"
#include "zomem/verify.h"

namespace zomem::cli {

namespace {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInfeasible:
      return kExitInfeasible;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNonFiniteGrad:
      return kExitVerificationFailed;
    default:
      return kExitInvalidInput;
  }
}

struct ModelSource {
  std::string config_path;
  std::string preset;

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--config", config_path, "config file")
                  ->check(CLI::ExistingFile);
    auto* p = cmd->add_option("--preset", preset, "llama2-7b or gpt2-medium");
    c->excludes(p);
  }

  ModelConfig resolve() const {
    if (!config_path.empty()) {
      return load_config_file(config_path).model;
    }
    return preset_config(preset.empty() ? "llama2-7b" : preset);
  }
};

const std::map<std::string, MemoryMode> kModes{
    {"bp", MemoryMode::kBp},
    {"bp-ckpt", MemoryMode::kBpCheckpointed},
    {"mezo", MemoryMode::kMezo}};

json breakdown_json(const MemoryBreakdown& m) {
  return json{{"mode", memory_mode_name(m.mode)},
              {"weights_bytes", m.weights_bytes},
              {"gradients_bytes", m.gradients_bytes},
              {"embedding_head_bytes", m.embedding_head_bytes},
              {"activations_bytes", m.activations_bytes},
              {"total_bytes", m.total_bytes}};
}

void print_breakdown(std::ostream& out, const MemoryBreakdown& m) {
  const std::pair<const char*, double> rows[] = {
      {"weights_bytes", m.weights_bytes},
      {"gradients_bytes", m.gradients_bytes},
      {"embedding_head_bytes", m.embedding_head_bytes},
      {"activations_bytes", m.activations_bytes},
      {"total_bytes", m.total_bytes}};
  fmt::print(out, "{:<22}{}\n", "mode", memory_mode_name(m.mode));
  for (const auto& [name, bytes] : rows) {
    fmt::print(out, "{:<22}{:>22}  {}\n", name, bytes, format_bytes(bytes));
  }
}

// Geometric (integer-rounded, deduplicated) or linear axis values.
std::vector<std::int64_t> axis_values(std::int64_t from, std::int64_t to,
                                      int points, bool geometric) {
  if (from < 1 || to <= from) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("need 1 <= from < to, got from={} to={}", from, to));
  }
  if (points < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("points must be >= 2, got {}", points));
  }
  std::vector<std::int64_t> values;
  for (int i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / (points - 1);
    const double v =
        geometric ? static_cast<double>(from) *
                        std::pow(static_cast<double>(to) / from, t)
                  : static_cast<double>(from) + t * static_cast<double>(to - from);
    values.push_back(i == points - 1 ? to : std::llround(v));
  }
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

int cmd_plan(const ModelSource& src, const std::string& mode, bool as_json,
             std::ostream& out) {
  const MemoryBreakdown m = memory_for(src.resolve(), kModes.at(mode));
  if (as_json) {
    out << breakdown_json(m).dump(2) << '\n';
  } else {
    print_breakdown(out, m);
  }
  return kExitOk;
}

int cmd_sweep(const ModelSource& src, const std::string& axis,
              std::int64_t from, std::int64_t to, int points, bool ckpt,
              const std::string& out_path, std::ostream& out) {
  SweepSpec spec;
  spec.base = src.resolve();
  spec.axis = axis == "n"   ? SweepAxis::kContext
              : axis == "l" ? SweepAxis::kLayers
                            : SweepAxis::kHidden;
  spec.values = axis_values(from, to, points, axis != "l");
  const std::vector<SweepRow> rows = sweep(spec, ckpt);
  std::string csv = "axis_value,m_bp,m_mezo,ratio\n";
  for (const SweepRow& r : rows) {
    csv += fmt::format("{},{},{},{}\n", r.axis_value, r.bp_total_bytes,
                       r.mezo_total_bytes, r.ratio);
  }
  if (out_path.empty()) {
    out << csv;
  } else {
    std::ofstream file(out_path, std::ios::binary);
    file << csv;
    if (!file) {
      throw Error(ErrorCode::kIo, fmt::format("cannot write '{}'", out_path));
    }
  }
  return kExitOk;
}

int cmd_solve(const ModelSource& src, const std::string& budget_text,
              const std::string& axis, const std::string& mode, bool as_json,
              std::ostream& out) {
  const double budget = parse_byte_count(budget_text);
  const FreeAxis free_axis = axis == "d" ? FreeAxis::kHidden : FreeAxis::kLayers;
  const MaxDimensionResult r =
      max_dimension(budget, src.resolve(), free_axis, kModes.at(mode));
  const std::int64_t params =
      param_elements(r.config, ParamCountMode::kSimplified);
  if (as_json) {
    json j{{"axis", axis == "d" ? "D" : "L"},
           {"value", r.value},
           {"budget_bytes", budget},
           {"param_elements", params},
           {"breakdown", breakdown_json(r.breakdown)}};
    out << j.dump(2) << '\n';
  } else {
    fmt::print(out, "{:<22}{}\n", "budget_bytes", budget);
    fmt::print(out, "{:<22}{}\n", axis == "d" ? "D" : "L", r.value);
    fmt::print(out, "{:<22}{}\n", "param_elements", params);
    print_breakdown(out, r.breakdown);
  }
  return kExitOk;
}

json summary_json(const MethodSummary& s) {
  return json{{"method", method_name(s.method)},
              {"best_learning_rate", s.best_learning_rate},
              {"initial_accuracy", s.initial_accuracy},
              {"plateau_accuracy", s.plateau_accuracy},
              {"steps_to_90_percent", s.steps_to_90_percent},
              {"wall_clock_s", s.wall_clock_seconds},
              {"failed_runs", s.failed_runs}};
}

int cmd_train(const std::string& plan_path, const std::string& out_dir,
              std::ostream& out) {
  const ExperimentPlan plan = load_plan_file(plan_path);
  const BudgetCheck budget = validate(plan);
  const std::vector<RunRecord> records = run_experiment(plan);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path csv_path =
      std::filesystem::path(out_dir) / "runs.csv";
  {
    std::ofstream file(csv_path, std::ios::binary);
    file << emit_csv(records);
    if (!file) {
      throw Error(ErrorCode::kIo,
                  fmt::format("cannot write '{}'", csv_path.string()));
    }
  }
  json summary{{"budget_bytes", plan.budget_bytes},
               {"bp_total_bytes", budget.bp_total_bytes},
               {"mezo_total_bytes", budget.mezo_total_bytes},
               {"bp_params", budget.bp_params},
               {"mezo_params", budget.mezo_params},
               {"methods", json::array()}};
  fmt::print(out, "budget {}: BP model {} params, {}; MeZO model {} params, {}\n",
             format_bytes(plan.budget_bytes), budget.bp_params,
             format_bytes(budget.bp_total_bytes), budget.mezo_params,
             format_bytes(budget.mezo_total_bytes));
  for (const Method method : {Method::kBp, Method::kMezo}) {
    const MethodSummary s = summarize(records, method);
    summary["methods"].push_back(summary_json(s));
    fmt::print(out,
               "{:<5} best lr {}  accuracy {:.4f} -> {:.4f}  90% of plateau "
               "at step {}  {:.2f} s  failed runs {}\n",
               method_name(method), s.best_learning_rate, s.initial_accuracy,
               s.plateau_accuracy, s.steps_to_90_percent, s.wall_clock_seconds,
               s.failed_runs);
  }
  for (const RunRecord& r : records) {
    if (r.failed) {
      fmt::print(out, "failed: {} lr {}: {}\n", method_name(r.method),
                 r.learning_rate, r.failure);
    }
  }
  std::ofstream(std::filesystem::path(out_dir) / "summary.json",
                std::ios::binary)
      << summary.dump(2) << '\n';
  fmt::print(out, "wrote {}\n", csv_path.string());
  return kExitOk;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  validate(options);
  bool all = true;
  for (const CheckResult& r : run_verification(options)) {
    fmt::print(out, "{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name,
               r.detail);
    all = all && r.passed;
  }
  return all ? kExitOk : kExitVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Memory planning and zeroth-order fine-tuning toolkit",
               "zomem"};
  app.require_subcommand(1);

  ModelSource plan_src, sweep_src, solve_src;
  std::string mode, axis, budget, out_path, plan_path;
  bool as_json = false, as_table = false, ckpt = false;
  std::int64_t from = 0, to = 0;
  int points = 16;
  VerifyOptions verify;

  auto* plan = app.add_subcommand("plan", "itemized memory of one config");
  plan_src.add_to(plan);
  plan->add_option("--mode", mode)
      ->required()
      ->check(CLI::IsMember({"bp", "bp-ckpt", "mezo"}));
  auto* j = plan->add_flag("--json", as_json);
  plan->add_flag("--table", as_table)->excludes(j);

  auto* sw = app.add_subcommand("sweep", "memory ratio along one axis (CSV)");
  sweep_src.add_to(sw);
  sw->add_option("--axis", axis)->required()->check(
      CLI::IsMember({"n", "l", "d"}));
  sw->add_option("--from", from)->required();
  sw->add_option("--to", to)->required();
  sw->add_option("--points", points);
  sw->add_flag("--ckpt", ckpt, "checkpointed BP");
  sw->add_option("--out", out_path, "CSV file (default stdout)");

  auto* solve = app.add_subcommand("solve", "largest D or L within a budget");
  solve_src.add_to(solve);
  solve->add_option("--budget", budget, "bytes, or with a GB/GiB suffix")
      ->required();
  solve->add_option("--axis", axis)->required()->check(
      CLI::IsMember({"d", "l"}));
  solve->add_option("--mode", mode)
      ->required()
      ->check(CLI::IsMember({"bp", "bp-ckpt", "mezo"}));
  solve->add_flag("--json", as_json);

  auto* train = app.add_subcommand("train", "run a fine-tuning plan");
  train->add_option("--plan", plan_path)->required()->check(
      CLI::ExistingFile);
  train->add_option("--out", out_path, "output directory")->required();

  auto* ver = app.add_subcommand("verify", "estimator self-checks");
  ver->add_option("--dim", verify.dim);
  ver->add_option("--seed", verify.seed);
  ver->add_option("--epsilon", verify.epsilon);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalidInput;
  }

  try {
    if (*plan) {
      return cmd_plan(plan_src, mode, as_json, out);
    }
    if (*sw) {
      return cmd_sweep(sweep_src, axis, from, to, points, ckpt, out_path, out);
    }
    if (*solve) {
      return cmd_solve(solve_src, budget, axis, mode, as_json, out);
    }
    if (*train) {
      return cmd_train(plan_path, out_path, out);
    }
    return cmd_verify(verify, out);
  } catch (const Error& e) {
    fmt::print(err, "zomem: {}\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    fmt::print(err, "zomem: {}\n", e.what());
    return kExitInvalidInput;
  }
}

}  // namespace zomem::cli

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

// Sectioned key = value configuration files.
//
//   [model]        preset plus any of the ModelConfig keys
//   [model.bp]     experiment only: overrides for the BP model
//   [model.mezo]   experiment only: overrides for the MeZO model
//   [mezo]         epsilon, learning_rate, num_perturbations, master_seed
//   [experiment]   fine-tuning plan, see load_plan
//
// '#' and ';' start comments. Unknown sections or keys are rejected. Within a
// model section the preset expands first and the remaining keys override it,
// whatever their order in the file. [model.bp] and [model.mezo] start from
// the resolved [model].

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zomem/bench.h"
#include "zomem/model_config.h"
#include "zomem/zo_core.h"

namespace zomem {

// "llama2-7b" or "gpt2-medium". Throws Error{kInvalidConfig}.
ModelConfig preset_config(std::string_view name);
std::vector<std::string_view> preset_names();

struct ConfigFile {
  ModelConfig model;
  std::optional<ModelConfig> bp_model;
  std::optional<ModelConfig> mezo_model;
  ZOConfig zo;
  bool has_experiment = false;
  ExperimentPlan plan;  // meaningful only when has_experiment
};

// Throws Error{kInvalidConfig} naming the section and key at fault. Model
// configs are validated after overrides are applied.
ConfigFile parse_config(std::string_view text);

// Reads and parses a file; kIo if it cannot be read.
ConfigFile load_config_file(const std::filesystem::path& path);

// Plan from a file with an [experiment] section. The task vocabulary comes
// from the models, which must agree on it.
ExperimentPlan load_plan_file(const std::filesystem::path& path);
ExperimentPlan plan_from_config(const ConfigFile& config);

}  // namespace zomem

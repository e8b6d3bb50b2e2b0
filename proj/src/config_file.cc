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

#include "zomem/config_file.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "zomem/error.h"
#include "zomem/units.h"

namespace zomem {

namespace {

using boost::property_tree::ptree;

constexpr std::string_view kModelSection = "model";
constexpr std::string_view kBpModelSection = "model.bp";
constexpr std::string_view kMezoModelSection = "model.mezo";
constexpr std::string_view kMezoSection = "mezo";
constexpr std::string_view kExperimentSection = "experiment";

[[noreturn]] void bad_value(std::string_view section, std::string_view key,
                            std::string_view value, std::string_view what) {
  throw Error(ErrorCode::kInvalidConfig,
              fmt::format("[{}] {} = '{}': {}", section, key, value, what));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_value(std::string_view section, std::string_view key,
              std::string_view raw) {
  const std::string_view text = trim(raw);
  T value{};
  const auto [end, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    bad_value(section, key, raw, "not a valid number");
  }
  return value;
}

std::vector<double> parse_list(std::string_view section, std::string_view key,
                               std::string_view raw) {
  std::vector<double> out;
  std::string_view rest = raw;
  while (true) {
    const std::size_t comma = rest.find(',');
    out.push_back(parse_value<double>(section, key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) {
      break;
    }
    rest = rest.substr(comma + 1);
  }
  return out;
}

// Key handlers per section; each writes one field.
template <typename Target>
using Setter = std::function<void(Target&, std::string_view section,
                                  std::string_view key, std::string_view)>;

template <typename Target, typename Field>
Setter<Target> number(Field Target::*field) {
  return [field](Target& t, std::string_view section, std::string_view key,
                 std::string_view raw) {
    t.*field = parse_value<Field>(section, key, raw);
  };
}

const std::map<std::string, Setter<ModelConfig>, std::less<>>& model_keys() {
  static const auto* keys =
      new std::map<std::string, Setter<ModelConfig>, std::less<>>{
          {"context_length", number(&ModelConfig::context_length)},
          {"num_layers", number(&ModelConfig::num_layers)},
          {"hidden_dim", number(&ModelConfig::hidden_dim)},
          {"num_heads", number(&ModelConfig::num_heads)},
          {"kv_heads", number(&ModelConfig::kv_heads)},
          {"num_mlps", number(&ModelConfig::num_mlps)},
          {"expansion_factor", number(&ModelConfig::expansion_factor)},
          {"vocab_size", number(&ModelConfig::vocab_size)},
          {"batch_size", number(&ModelConfig::batch_size)},
          {"bytes_per_param", number(&ModelConfig::bytes_per_param)},
          {"stored_layers", number(&ModelConfig::stored_layers)},
      };
  return *keys;
}

const std::map<std::string, Setter<ZOConfig>, std::less<>>& mezo_keys() {
  static const auto* keys =
      new std::map<std::string, Setter<ZOConfig>, std::less<>>{
          {"epsilon", number(&ZOConfig::epsilon)},
          {"learning_rate", number(&ZOConfig::learning_rate)},
          {"num_perturbations", number(&ZOConfig::num_perturbations)},
          {"master_seed", number(&ZOConfig::master_seed)},
      };
  return *keys;
}

const std::map<std::string, Setter<ExperimentPlan>, std::less<>>&
experiment_keys() {
  using P = ExperimentPlan;
  static const auto* keys = new std::map<std::string, Setter<P>, std::less<>>{
      {"budget",
       [](P& p, std::string_view section, std::string_view key,
          std::string_view raw) {
         try {
           p.budget_bytes = parse_byte_count(trim(raw));
         } catch (const Error& e) {
           bad_value(section, key, raw, e.message());
         }
       }},
      {"task",
       [](P& p, std::string_view section, std::string_view key,
          std::string_view raw) {
         try {
           p.task.kind = parse_task_kind(trim(raw));
         } catch (const Error& e) {
           bad_value(section, key, raw, e.message());
         }
       }},
      {"scope",
       [](P& p, std::string_view section, std::string_view key,
          std::string_view raw) {
         try {
           p.scope = parse_scope(trim(raw));
         } catch (const Error& e) {
           bad_value(section, key, raw, e.message());
         }
       }},
      {"seq_len",
       [](P& p, std::string_view s, std::string_view k, std::string_view raw) {
         p.task.seq_len = parse_value<std::int64_t>(s, k, raw);
       }},
      {"task_seed",
       [](P& p, std::string_view s, std::string_view k, std::string_view raw) {
         p.task.seed = parse_value<std::uint64_t>(s, k, raw);
       }},
      {"label_shift",
       [](P& p, std::string_view s, std::string_view k, std::string_view raw) {
         p.task.label_shift = parse_value<std::int64_t>(s, k, raw);
       }},
      {"lr_grid_bp",
       [](P& p, std::string_view s, std::string_view k, std::string_view raw) {
         p.lr_grid_bp = parse_list(s, k, raw);
       }},
      {"lr_grid_mezo",
       [](P& p, std::string_view s, std::string_view k, std::string_view raw) {
         p.lr_grid_mezo = parse_list(s, k, raw);
       }},
      {"steps", number(&P::steps)},
      {"eval_every", number(&P::eval_every)},
      {"eval_examples", number(&P::eval_examples)},
      {"run_seed", number(&P::run_seed)},
      {"pretrain_steps", number(&P::pretrain_steps)},
      {"pretrain_learning_rate", number(&P::pretrain_learning_rate)},
      {"pretrain_label_shift", number(&P::pretrain_label_shift)},
  };
  return *keys;
}

template <typename Target>
void apply_keys(
    const ptree& section, std::string_view name,
    const std::map<std::string, Setter<Target>, std::less<>>& keys,
    Target& target, std::set<std::string>* seen = nullptr) {
  for (const auto& [key, child] : section) {
    if (!child.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("[{}] {}: nested keys are not supported", name,
                              key));
    }
    if (key == "preset") {
      continue;
    }
    const auto it = keys.find(key);
    if (it == keys.end()) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("[{}] unknown key '{}'", name, key));
    }
    it->second(target, name, key, child.data());
    if (seen != nullptr) {
      seen->insert(key);
    }
  }
}

ModelConfig resolve_model(const ptree& section, std::string_view name,
                          ModelConfig base) {
  if (const auto preset = section.get_child_optional(
          ptree::path_type(std::string("preset"), '\0'))) {
    try {
      base = preset_config(trim(preset->data()));
    } catch (const Error& e) {
      bad_value(name, "preset", preset->data(), e.message());
    }
  }
  apply_keys(section, name, model_keys(), base);
  try {
    validate(base);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("[{}] {}", name, e.message()));
  }
  return base;
}

const ptree* find_section(const ptree& root, std::string_view name) {
  const auto it = root.find(std::string(name));
  return it == root.not_found() ? nullptr : &it->second;
}

}  // namespace

ModelConfig preset_config(std::string_view name) {
  if (name == "llama2-7b") {
    return llama2_7b();
  }
  if (name == "gpt2-medium") {
    return gpt2_medium();
  }
  throw Error(ErrorCode::kInvalidConfig,
              fmt::format("unknown preset '{}' (known: llama2-7b, "
                          "gpt2-medium)",
                          name));
}

std::vector<std::string_view> preset_names() {
  return {"llama2-7b", "gpt2-medium"};
}

ConfigFile parse_config(std::string_view text) {
  ptree root;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kInvalidConfig,
                fmt::format("line {}: {}", e.line(), e.message()));
  }
  const std::set<std::string_view> known{kModelSection, kBpModelSection,
                                         kMezoModelSection, kMezoSection,
                                         kExperimentSection};
  for (const auto& [name, child] : root) {
    if (child.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("key '{}' appears outside any section", name));
    }
    if (!known.contains(name)) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("unknown section [{}]", name));
    }
  }

  ConfigFile config;
  if (const ptree* s = find_section(root, kModelSection)) {
    config.model = resolve_model(*s, kModelSection, config.model);
  }
  if (const ptree* s = find_section(root, kBpModelSection)) {
    config.bp_model = resolve_model(*s, kBpModelSection, config.model);
  }
  if (const ptree* s = find_section(root, kMezoModelSection)) {
    config.mezo_model = resolve_model(*s, kMezoModelSection, config.model);
  }
  if (const ptree* s = find_section(root, kMezoSection)) {
    apply_keys(*s, kMezoSection, mezo_keys(), config.zo);
    try {
      validate(config.zo);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidConfig,
                  fmt::format("[{}] {}", kMezoSection, e.message()));
    }
  }
  if (const ptree* s = find_section(root, kExperimentSection)) {
    config.has_experiment = true;
    config.plan.task.seq_len = -1;  // defaults to the context length below
    std::set<std::string> seen;
    apply_keys(*s, kExperimentSection, experiment_keys(), config.plan, &seen);
    config.plan.zo = config.zo;
  }
  return config;
}

ConfigFile load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo,
                fmt::format("cannot open config file '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.message()));
  }
}

ExperimentPlan plan_from_config(const ConfigFile& config) {
  if (!config.has_experiment) {
    throw Error(ErrorCode::kInvalidConfig, "missing [experiment] section");
  }
  ExperimentPlan plan = config.plan;
  plan.bp_model = config.bp_model.value_or(config.model);
  plan.mezo_model = config.mezo_model.value_or(config.model);
  if (plan.bp_model.vocab_size != plan.mezo_model.vocab_size) {
    throw Error(ErrorCode::kInvalidConfig,
                "[model.bp] and [model.mezo] must share vocab_size");
  }
  plan.task.vocab_size = plan.bp_model.vocab_size;
  if (plan.task.seq_len < 0) {
    plan.task.seq_len = std::min(plan.bp_model.context_length,
                                 plan.mezo_model.context_length);
  }
  validate(plan);
  return plan;
}

ExperimentPlan load_plan_file(const std::filesystem::path& path) {
  const ConfigFile config = load_config_file(path);
  try {
    return plan_from_config(config);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.message()));
  }
}

}  // namespace zomem

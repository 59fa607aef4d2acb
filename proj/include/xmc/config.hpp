/**
 * Copyright 2026 The xmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xmc/contrastive.hpp"
#include "xmc/datagen.hpp"
#include "xmc/eval.hpp"
#include "xmc/mi.hpp"
#include "xmc/models.hpp"

namespace xmc {

struct DatagenSection {
  SimConfig sim;
  int n = 2000;
};

struct EvalSection {
  ProbeConfig probe;
  /// Label fraction for single probe, finetune and baseline runs.
  double fraction = 1.0;
  /// Fractions below the smallest feasible one are raised to it.
  std::vector<double> label_fractions = {0.01, 0.05, 0.1, 0.5, 1.0};
  std::vector<int> queue_sizes = {8, 32, 128, 256};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct MiSection {
  CriticConfig critic;
  int steps = 3000;
  std::vector<double> rhos = {0.0, 0.3, 0.6, 0.9};
  std::vector<int> dims = {1};
  std::vector<int> queue_sizes = {256};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};

/// Input artifact paths. Relative paths resolve against the output directory.
struct IoSection {
  std::string dataset = "dataset.bin";
  std::string splits = "splits.json";
  std::string vision = "vision.ckpt";
  std::string radio = "radio.ckpt";
};

/// Every run is determined by this plus the code version. Module seeds are
/// derived from `seed`; the seed fields inside the sections are not read.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatagenSection datagen;
  VisionConfig vision;
  ContrastiveConfig contrastive;
  EvalSection eval;
  MiSection mi;
  IoSection io;

  /// Range checks across all sections; throws ConfigError.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys throw ConfigError naming
/// the full key path.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& p);
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Applies one "section.key=value" override, value parsed as JSON with a
/// fallback to a bare string.
void apply_override(ExperimentConfig& c, std::string_view assignment);

}  // namespace xmc

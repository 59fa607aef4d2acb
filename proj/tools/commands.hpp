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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xmc/config.hpp"

namespace xmc::cli {

struct RunOptions {
  std::filesystem::path out = ".";
  bool force = false;
  int jobs = 1;
};

/// Where a command is; used to name the failing stage in diagnostics.
struct Progress {
  std::string stage = "start";
};

const std::vector<std::string>& command_names();

/// Output file names a command writes into the output directory, manifest excluded.
std::vector<std::string> command_outputs(std::string_view command);

/// File name of the manifest a command writes.
std::string manifest_name(std::string_view command);

/// Makes relative io paths absolute against `out`.
ExperimentConfig resolve_paths(ExperimentConfig cfg, const std::filesystem::path& out);

/// Runs one command, writes its outputs and manifest, and returns the manifest.
/// Throws UsageError before doing any work when an output exists and
/// `force` is not set.
nlohmann::json run_command(std::string_view command, const ExperimentConfig& cfg, const RunOptions& opts,
                           Progress& progress);

struct ReplayReport {
  nlohmann::json manifest;          // of the new run
  std::vector<std::string> differing;  // outputs whose hash changed
};

/// Re-runs the command recorded in `manifest_path` into `opts.out`, after
/// checking that every recorded input still has its recorded hash.
ReplayReport replay(const std::filesystem::path& manifest_path, const RunOptions& opts, Progress& progress);

}  // namespace xmc::cli

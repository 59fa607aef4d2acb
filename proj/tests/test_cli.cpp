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

#include <filesystem>

#include "commands.hpp"
#include "doctest.h"
#include "xmc/error.hpp"
#include "xmc/io.hpp"

using namespace xmc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c = parse_config(R"({
    "datagen": {"n": 120},
    "vision": {"epochs": 1, "hidden": [16], "embed_dim": 8},
    "contrastive": {"epochs": 1, "hidden": [16], "embed_dim": 8, "queue_size": 64, "batch_size": 16},
    "eval": {"epochs": 1, "baseline_epochs": 1, "baseline_hidden": [8], "baseline_embed_dim": 4,
             "label_fractions": [0.01, 1.0]},
    "mi": {"steps": 5, "rhos": [0.5], "seeds": [1], "eval_pairs": 512}
  })");
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xmc_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("commands chain through the output directory and replay identically") {
  const fs::path out = fresh_dir("chain");
  const fs::path again = fresh_dir("chain_replay");
  const ExperimentConfig cfg = tiny_config();
  cli::Progress progress;
  const cli::RunOptions opts{out, false, 1};
  for (const char* cmd : {"gen-data", "pretrain-vision", "pretrain", "probe", "sweep-labels", "estimate-mi"}) {
    const auto m = cli::run_command(cmd, cfg, opts, progress);
    CHECK(m.at("command") == cmd);
    for (const auto& name : cli::command_outputs(cmd)) {
      CHECK(fs::exists(out / name));
      CHECK(m.at("outputs").at(name) == sha256_file(out / name));
    }
  }
  const Dataset d = load_dataset(out / "dataset.bin", out / "splits.json");
  CHECK(d.size() == 120);
  CHECK(d.range_bins == cfg.datagen.sim.range_bins);

  const auto rows = read_file(out / "sweep_labels_runs.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 1 + 2 * 2 * 3);

  CHECK_THROWS_AS(cli::run_command("gen-data", cfg, opts, progress), UsageError);
  CHECK_NOTHROW(cli::run_command("gen-data", cfg, {out, true, 1}, progress));

  for (const char* cmd : {"gen-data", "pretrain", "sweep-labels", "estimate-mi"}) {
    const auto report = cli::replay(out / cli::manifest_name(cmd), {again, false, 2}, progress);
    CHECK(report.differing.empty());
  }
}

TEST_CASE("missing inputs") {
  const fs::path out = fresh_dir("missing");
  cli::Progress progress;
  CHECK_THROWS_AS(cli::run_command("probe", tiny_config(), {out, false, 1}, progress), MissingFileError);
  CHECK(progress.stage == "hash inputs");
  CHECK_THROWS_AS(cli::run_command("nope", tiny_config(), {out, false, 1}, progress), UsageError);
}

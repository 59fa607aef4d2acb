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

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "xmc/config.hpp"
#include "xmc/error.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kMissingFile = 2, kConfig = 3, kNumeric = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool force = false;
  int jobs = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON experiment config; missing keys keep their defaults");
  sub->add_option("--seed", c.seed, "Root seed, overrides the config");
  sub->add_option("--out", c.out, "Output directory; relative io paths resolve against it")->capture_default_str();
  sub->add_flag("--force", c.force, "Overwrite existing outputs");
  sub->add_option("--jobs", c.jobs, "Worker threads for sweeps")->envname("XMC_JOBS")->capture_default_str();
  sub->add_option("--set", c.overrides, "Config override section.key=value (value is JSON)");
}

// Shortcut flags that expand to --set overrides.
struct Shortcut {
  const char* flag;
  const char* key;
  const char* help;
};

const std::map<std::string, std::vector<Shortcut>> kShortcuts = {
    {"gen-data", {{"--n", "datagen.n", "Number of samples"}}},
    {"pretrain-vision", {{"--mode", "vision.mode", "trained or random-frozen"}}},
    {"pretrain",
     {{"--epochs", "contrastive.epochs", "Pre-training epochs"},
      {"--queue-size", "contrastive.queue_size", "Negative queue size K"},
      {"--batch-size", "contrastive.batch_size", "Batch size"}}},
    {"probe", {{"--fraction", "eval.fraction", "Label fraction"}, {"--radio", "io.radio", "Radio checkpoint"}}},
    {"finetune", {{"--fraction", "eval.fraction", "Label fraction"}, {"--radio", "io.radio", "Radio checkpoint"}}},
    {"baseline", {{"--fraction", "eval.fraction", "Label fraction"}}},
    {"sweep-k", {{"--k", "eval.queue_sizes", "JSON list of queue sizes"}}},
    {"sweep-labels", {{"--fractions", "eval.label_fractions", "JSON list of label fractions"}}},
    {"estimate-mi",
     {{"--rho", "mi.rhos", "JSON list of correlations"},
      {"--dim", "mi.dims", "JSON list of dimensions"},
      {"--k", "mi.queue_sizes", "JSON list of queue sizes"},
      {"--steps", "mi.steps", "Training steps per estimate"}}},
    {"project", {{"--radio", "io.radio", "Encoder checkpoint to project"}}},
};

xmc::ExperimentConfig build_config(const Common& c, const std::vector<std::string>& shortcut_overrides) {
  xmc::ExperimentConfig cfg = c.config.empty() ? xmc::ExperimentConfig{} : xmc::load_config(c.config);
  for (const auto& o : shortcut_overrides) xmc::apply_override(cfg, o);
  for (const auto& o : c.overrides) xmc::apply_override(cfg, o);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

const std::map<std::string, std::string> kDescriptions = {
    {"gen-data", "Simulate paired radar/camera scenes and write the splits"},
    {"pretrain-vision", "Train and freeze the vision teacher"},
    {"pretrain", "Contrastive radio pre-training against the frozen teacher"},
    {"probe", "Linear probe on frozen radio features"},
    {"finetune", "Fine-tune the radio encoder with a classifier head"},
    {"baseline", "Supervised radio encoder trained from scratch"},
    {"sweep-k", "Pre-train and probe for every queue size and seed"},
    {"sweep-labels", "Fine-tune vs supervised across label fractions"},
    {"estimate-mi", "InfoNCE lower bound on correlated Gaussian pairs"},
    {"project", "2-D PCA of test embeddings under a radio checkpoint"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal radio/vision contrastive learning experiments"};
  app.require_subcommand(1);

  Common common;
  std::map<std::string, std::map<std::string, std::string>> shortcut_values;
  std::map<CLI::App*, std::string> names;
  for (const auto& name : xmc::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    add_common(sub, common);
    const auto it = kShortcuts.find(name);
    if (it != kShortcuts.end()) {
      for (const auto& s : it->second) {
        sub->add_option(s.flag, shortcut_values[name][s.key], s.help);
      }
    }
    names[sub] = name;
  }
  std::string manifest;
  CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its manifest and compare output hashes");
  replay->add_option("manifest", manifest, "Manifest written by an earlier run")->required();
  replay->add_option("--out", common.out, "Output directory for the re-run")->required();
  replay->add_flag("--force", common.force, "Overwrite existing outputs");
  replay->add_option("--jobs", common.jobs, "Worker threads for sweeps")->envname("XMC_JOBS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  xmc::cli::Progress progress;
  std::string command = "replay";
  try {
    const xmc::cli::RunOptions opts{common.out, common.force, common.jobs};
    if (replay->parsed()) {
      const auto report = xmc::cli::replay(manifest, opts, progress);
      if (!report.differing.empty()) {
        for (const auto& d : report.differing) std::cerr << "xmc replay: output differs: " << d << '\n';
        return kFailure;
      }
      std::cout << "replay: all " << report.manifest.at("outputs").size() << " outputs identical\n";
      return kOk;
    }
    CLI::App* sub = app.get_subcommands().front();
    command = names.at(sub);
    progress.stage = "load config";
    std::vector<std::string> shortcuts;
    for (const auto& [key, value] : shortcut_values[command]) {
      if (!value.empty()) shortcuts.push_back(key + "=" + value);
    }
    const xmc::ExperimentConfig cfg = build_config(common, shortcuts);
    const auto m = xmc::cli::run_command(command, cfg, opts, progress);
    for (const auto& [name, hash] : m.at("outputs").items()) {
      std::cout << hash.get<std::string>() << "  " << (std::filesystem::path(common.out) / name).string() << '\n';
    }
    return kOk;
  } catch (const xmc::MissingFileError& e) {
    std::cerr << "xmc " << command << ": " << progress.stage << ": " << e.what() << '\n';
    return kMissingFile;
  } catch (const xmc::ConfigError& e) {
    std::cerr << "xmc " << command << ": " << progress.stage << ": " << e.what() << '\n';
    return kConfig;
  } catch (const xmc::NumericError& e) {
    std::cerr << "xmc " << command << ": " << progress.stage << ": " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "xmc " << command << ": " << progress.stage << ": " << e.what() << '\n';
    return kFailure;
  }
}

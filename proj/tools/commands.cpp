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

#include "commands.hpp"

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "xmc/contrastive.hpp"
#include "xmc/error.hpp"
#include "xmc/eval.hpp"
#include "xmc/io.hpp"
#include "xmc/mi.hpp"
#include "xmc/models.hpp"

namespace xmc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kVersion = "xmc 1.0.0";

enum class Input { kDataset, kVision, kRadio };

struct Artifact {
  std::string name;
  std::vector<char> bytes;
};

struct Context {
  const ExperimentConfig& cfg;
  int jobs;
  Progress& progress;
  std::vector<Artifact> outputs;

  void emit(std::string name, std::vector<char> bytes) { outputs.push_back({std::move(name), std::move(bytes)}); }
  void emit(std::string name, std::string_view text) { emit(std::move(name), std::vector<char>(text.begin(), text.end())); }
  void stage(std::string s) {
    progress.stage = std::move(s);
    std::cerr << "[xmc] " << progress.stage << '\n';
  }
};

struct Command {
  std::vector<Input> inputs;
  std::vector<std::string> outputs;
  std::function<void(Context&)> run;
};

std::vector<fs::path> input_paths(const ExperimentConfig& cfg, const std::vector<Input>& inputs) {
  std::vector<fs::path> out;
  for (Input in : inputs) {
    switch (in) {
      case Input::kDataset:
        out.emplace_back(cfg.io.dataset);
        out.emplace_back(cfg.io.splits);
        break;
      case Input::kVision:
        out.emplace_back(cfg.io.vision);
        break;
      case Input::kRadio:
        out.emplace_back(cfg.io.radio);
        break;
    }
  }
  return out;
}

Dataset load_inputs_dataset(Context& ctx) {
  ctx.stage("load dataset " + ctx.cfg.io.dataset);
  return load_dataset(ctx.cfg.io.dataset, ctx.cfg.io.splits);
}

EncoderModel load_encoder(Context& ctx, const std::string& path) {
  ctx.stage("load checkpoint " + path);
  return load_checkpoint(path).model;
}

std::string epoch_history_csv(const std::vector<EpochRecord>& h) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,test_loss,test_accuracy\n";
  for (const auto& r : h) {
    os << r.epoch << ',' << r.train_loss << ',' << r.test_loss << ',' << r.test_accuracy << '\n';
  }
  return os.str();
}

ProbeConfig probe_config(const ExperimentConfig& cfg, std::string_view label) {
  ProbeConfig p = cfg.eval.probe;
  p.seed = derive_seed(cfg.seed, label);
  return p;
}

void run_gen_data(Context& ctx) {
  ctx.stage("generate dataset");
  const Dataset d = make_dataset(ctx.cfg.datagen.sim, ctx.cfg.datagen.n, derive_seed(ctx.cfg.seed, "datagen"));
  ctx.emit("dataset.bin", encode_dataset(d));
  ctx.emit("splits.json", encode_splits(d));
}

void run_pretrain_vision(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  VisionConfig vc = ctx.cfg.vision;
  vc.seed = derive_seed(ctx.cfg.seed, "vision");
  ctx.stage("train vision encoder");
  const VisionResult r = pretrain_vision(d, vc);
  if (!r.history.empty()) {
    std::cerr << "[xmc] vision test accuracy " << r.history.back().test_accuracy << '\n';
  }
  ctx.emit("vision.ckpt", encode_checkpoint(r.encoder));
  ctx.emit("vision_history.csv", epoch_history_csv(r.history));
}

void run_pretrain(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel vision = load_encoder(ctx, ctx.cfg.io.vision);
  ContrastiveConfig cc = ctx.cfg.contrastive;
  cc.seed = derive_seed(ctx.cfg.seed, "contrastive");
  const std::vector<char> before = vision.parameter_bytes();
  ctx.stage("contrastive pre-training");
  const PretrainResult r = pretrain(d, vision, cc);
  if (vision.parameter_bytes() != before) {
    throw ContractError("pretrain: vision encoder parameters changed");
  }
  std::cerr << "[xmc] final contrastive loss " << r.history.back().mean_loss << '\n';
  ctx.emit("radio.ckpt", encode_checkpoint(r.radio, &r.optimizer));
  ctx.emit("pretrain_history.csv", contrastive_history_csv(r.history));
}

void run_probe(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel radio = load_encoder(ctx, ctx.cfg.io.radio);
  ctx.stage("linear probe");
  const ProbeResult r = linear_probe(extract_features(radio, d, d.contrastive()), extract_features(radio, d, d.test),
                                     ctx.cfg.eval.fraction, probe_config(ctx.cfg, "probe"));
  std::cerr << "[xmc] probe test accuracy " << r.test_accuracy << '\n';
  ctx.emit("probe_results.csv", probe_results_csv({r}));
  ctx.emit("probe_curve.csv", probe_curve_csv({r}));
}

void run_finetune(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel radio = load_encoder(ctx, ctx.cfg.io.radio);
  ctx.stage("fine-tune");
  EncoderModel tuned;
  const ProbeResult r = finetune(radio, d, ctx.cfg.eval.fraction, probe_config(ctx.cfg, "finetune"), &tuned);
  std::cerr << "[xmc] fine-tune test accuracy " << r.test_accuracy << '\n';
  ctx.emit("finetune_results.csv", probe_results_csv({r}));
  ctx.emit("finetune_curve.csv", probe_curve_csv({r}));
  ctx.emit("finetuned.ckpt", encode_checkpoint(tuned));
}

void run_baseline(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  ctx.stage("supervised baseline");
  const ProbeResult r = supervised_baseline(d, ctx.cfg.eval.fraction, probe_config(ctx.cfg, "baseline"));
  std::cerr << "[xmc] baseline test accuracy " << r.test_accuracy << '\n';
  ctx.emit("baseline_results.csv", probe_results_csv({r}));
  ctx.emit("baseline_curve.csv", probe_curve_csv({r}));
}

void run_sweep_k(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel vision = load_encoder(ctx, ctx.cfg.io.vision);
  ContrastiveConfig cc = ctx.cfg.contrastive;
  cc.seed = derive_seed(ctx.cfg.seed, "contrastive");
  ctx.stage("queue-size sweep");
  const QueueSweep s =
      sweep_queue(d, vision, ctx.cfg.eval.queue_sizes, ctx.cfg.eval.seeds, cc, probe_config(ctx.cfg, "probe"),
                  ctx.jobs);
  ctx.emit("sweep_k.csv", sweep_csv({s.table}));
  ctx.emit("sweep_k_runs.csv", probe_results_csv(s.runs));
}

void run_sweep_labels(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel radio = load_encoder(ctx, ctx.cfg.io.radio);
  const double lowest = smallest_feasible_fraction(d.contrastive().size());
  std::vector<double> fractions;
  for (double f : ctx.cfg.eval.label_fractions) {
    const double g = std::max(f, lowest);
    if (std::find(fractions.begin(), fractions.end(), g) == fractions.end()) {
      fractions.push_back(g);
    }
  }
  ctx.stage("label-fraction sweep");
  const LabelSweep s =
      sweep_labels(d, radio, fractions, ctx.cfg.eval.seeds, probe_config(ctx.cfg, "label-sweep"), ctx.jobs);
  ctx.emit("sweep_labels.csv", sweep_csv({s.finetune, s.supervised}));
  ctx.emit("sweep_labels_runs.csv", probe_results_csv(s.runs));
  ctx.emit("sweep_labels_curves.csv", probe_curve_csv(s.runs));
}

void run_estimate_mi(Context& ctx) {
  const MiSection& m = ctx.cfg.mi;
  struct Job {
    double rho;
    int dim;
    int k;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double rho : m.rhos)
    for (int dim : m.dims)
      for (int k : m.queue_sizes)
        for (std::uint64_t s : m.seeds) jobs.push_back({rho, dim, k, s});
  std::vector<MiEstimate> rows(jobs.size());
  ctx.stage("MI estimation");
  parallel_for(jobs.size(), ctx.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    const GaussianPairConfig g{j.dim, j.rho, 0, derive_seed(ctx.cfg.seed, "mi", j.seed)};
    rows[i] = estimate_mi_gaussian(g, m.critic, j.k, m.steps);
    rows[i].seed = j.seed;
  });
  ctx.emit("mi.csv", mi_csv(rows));
}

void run_project(Context& ctx) {
  const Dataset d = load_inputs_dataset(ctx);
  const EncoderModel radio = load_encoder(ctx, ctx.cfg.io.radio);
  ctx.stage("PCA projection");
  const LabeledSet test = extract_features(radio, d, d.test);
  const Projection p = project_2d(test.inputs);
  const double sep = cluster_separation(p.coords, test.labels);
  std::cerr << "[xmc] cluster separation " << sep << '\n';
  ctx.emit("projection.csv", projection_csv(p, test.labels));
  const json summary = {{"explained_variance_ratio", p.explained_variance_ratio}, {"cluster_separation", sep}};
  ctx.emit("projection_summary.json", summary.dump(2) + "\n");
}

const std::map<std::string, Command, std::less<>>& registry() {
  static const std::map<std::string, Command, std::less<>> r = {
      {"gen-data", {{}, {"dataset.bin", "splits.json"}, run_gen_data}},
      {"pretrain-vision", {{Input::kDataset}, {"vision.ckpt", "vision_history.csv"}, run_pretrain_vision}},
      {"pretrain", {{Input::kDataset, Input::kVision}, {"radio.ckpt", "pretrain_history.csv"}, run_pretrain}},
      {"probe", {{Input::kDataset, Input::kRadio}, {"probe_results.csv", "probe_curve.csv"}, run_probe}},
      {"finetune",
       {{Input::kDataset, Input::kRadio},
        {"finetune_results.csv", "finetune_curve.csv", "finetuned.ckpt"},
        run_finetune}},
      {"baseline", {{Input::kDataset}, {"baseline_results.csv", "baseline_curve.csv"}, run_baseline}},
      {"sweep-k", {{Input::kDataset, Input::kVision}, {"sweep_k.csv", "sweep_k_runs.csv"}, run_sweep_k}},
      {"sweep-labels",
       {{Input::kDataset, Input::kRadio},
        {"sweep_labels.csv", "sweep_labels_runs.csv", "sweep_labels_curves.csv"},
        run_sweep_labels}},
      {"estimate-mi", {{}, {"mi.csv"}, run_estimate_mi}},
      {"project", {{Input::kDataset, Input::kRadio}, {"projection.csv", "projection_summary.json"}, run_project}},
  };
  return r;
}

const Command& lookup(std::string_view name) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    throw UsageError("unknown command \"" + std::string(name) + "\"");
  }
  return it->second;
}

fs::path absolute_under(const fs::path& p, const fs::path& base) {
  return fs::weakly_canonical(p.is_absolute() ? p : base / p);
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

std::vector<std::string> command_outputs(std::string_view command) { return lookup(command).outputs; }

std::string manifest_name(std::string_view command) { return std::string(command) + ".manifest.json"; }

ExperimentConfig resolve_paths(ExperimentConfig cfg, const fs::path& out) {
  const fs::path base = fs::absolute(out);
  for (std::string* p : {&cfg.io.dataset, &cfg.io.splits, &cfg.io.vision, &cfg.io.radio}) {
    *p = absolute_under(*p, base).string();
  }
  return cfg;
}

json run_command(std::string_view command, const ExperimentConfig& raw, const RunOptions& opts, Progress& progress) {
  const Command& cmd = lookup(command);
  progress.stage = "prepare output directory";
  const ExperimentConfig cfg = resolve_paths(raw, opts.out);
  cfg.validate();
  std::vector<std::string> targets = cmd.outputs;
  targets.push_back(manifest_name(command));
  if (!opts.force) {
    for (const auto& t : targets) {
      if (fs::exists(opts.out / t)) {
        throw UsageError("refusing to overwrite " + (opts.out / t).string() + " (pass --force)");
      }
    }
  }

  progress.stage = "hash inputs";
  json inputs = json::array();
  for (const auto& p : input_paths(cfg, cmd.inputs)) {
    inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }

  Context ctx{cfg, std::max(1, opts.jobs), progress, {}};
  cmd.run(ctx);

  progress.stage = "write outputs";
  fs::create_directories(opts.out);
  json outputs = json::object();
  for (const auto& a : ctx.outputs) {
    write_file_atomic(opts.out / a.name, a.bytes);
    outputs[a.name] = sha256_hex(a.bytes);
  }
  json manifest = {{"tool", kVersion},
                   {"command", std::string(command)},
                   {"config", config_to_json(cfg)},
                   {"inputs", inputs},
                   {"outputs", outputs}};
  write_text_atomic(opts.out / manifest_name(command), manifest.dump(2) + "\n");
  progress.stage = "done";
  return manifest;
}

ReplayReport replay(const fs::path& manifest_path, const RunOptions& opts, Progress& progress) {
  progress.stage = "read manifest";
  const auto bytes = read_file(manifest_path);
  json m;
  try {
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  if (!m.contains("command") || !m.contains("config") || !m.contains("inputs") || !m.contains("outputs")) {
    throw FormatError("manifest " + manifest_path.string() + " lacks command, config, inputs or outputs");
  }
  const std::string command = m.at("command").get<std::string>();
  const ExperimentConfig cfg = config_from_json(m.at("config"));

  progress.stage = "verify inputs";
  for (const auto& in : m.at("inputs")) {
    const fs::path p = in.at("path").get<std::string>();
    if (sha256_file(p) != in.at("sha256").get<std::string>()) {
      throw Error("replay: input " + p.string() + " no longer matches its recorded hash");
    }
  }

  ReplayReport report;
  report.manifest = run_command(command, cfg, opts, progress);
  for (const auto& [name, hash] : m.at("outputs").items()) {
    const json& now = report.manifest.at("outputs");
    if (!now.contains(name) || now.at(name) != hash) {
      report.differing.push_back(name);
    }
  }
  return report;
}

}  // namespace xmc::cli

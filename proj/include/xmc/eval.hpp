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
#include <functional>
#include <string>
#include <vector>

#include "xmc/contrastive.hpp"
#include "xmc/datagen.hpp"
#include "xmc/models.hpp"

namespace xmc {

enum class ProbeMode { kLinearProbe, kFineTune, kSupervisedBaseline };

std::string_view mode_name(ProbeMode m);

struct ProbeConfig {
  int epochs = 32;
  int baseline_epochs = 128;
  int batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {256, 256};
  int embed_dim = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CurvePoint {
  int epoch = 0;
  double loss = 0;
};

struct ProbeResult {
  double label_fraction = 1.0;
  ProbeMode mode = ProbeMode::kLinearProbe;
  int labels_used = 0;
  double test_accuracy = 0;
  /// Test loss after every epoch.
  std::vector<CurvePoint> test_loss_curve;
  /// Epoch with the lowest test loss, and the accuracy there.
  int best_epoch = 0;
  double best_epoch_accuracy = 0;
  std::uint64_t seed = 0;
};

/// Embeddings of `indices` under a fixed encoder, with labels.
LabeledSet extract_features(const EncoderModel& encoder, const Dataset& d, const std::vector<std::uint32_t>& indices);

/// Positions (into `labels`) of a stratified subsample of ceil(fraction * N)
/// labels; per-class counts differ by at most one. Throws StratificationError
/// when a class would be missing or is too rare.
std::vector<std::size_t> stratified_subsample(const LabelVector& labels, double fraction, std::uint64_t seed);

/// Smallest fraction of `n_train` labels that still places one label in
/// every class.
double smallest_feasible_fraction(std::size_t n_train);

/// Softmax linear classifier trained on fixed features.
ProbeResult linear_probe(const LabeledSet& train, const LabeledSet& test, double fraction, const ProbeConfig& cfg);

/// Encoder and head trained together, starting from a copy of `encoder`.
/// The copy is returned through `tuned` when non-null.
ProbeResult finetune(const EncoderModel& encoder, const Dataset& d, double fraction, const ProbeConfig& cfg,
                     EncoderModel* tuned = nullptr);

/// Fresh radio encoder and head trained end to end on the labelled fraction.
ProbeResult supervised_baseline(const Dataset& d, double fraction, const ProbeConfig& cfg);

struct SweepRow {
  double axis_value = 0;
  double mean_accuracy = 0;
  double std_accuracy = 0;
  int seeds = 0;
};

struct SweepTable {
  std::string axis;  // "K" or "label_fraction"
  std::string arm;
  std::vector<SweepRow> rows;
};

/// Summarises per-seed accuracies keyed by axis value (sample std, n-1).
SweepRow summarize(double axis_value, const std::vector<double>& accuracies);

struct LabelSweep {
  SweepTable finetune;
  SweepTable supervised;
  std::vector<ProbeResult> runs;  // fractions x arms x seeds
};

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads. Results must be
/// written into slots keyed by i.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

/// Both sweeps treat cfg.seed (base.seed, probe.seed) as a root: arm seeds
/// are derived from it and each listed seed, and results report the listed
/// seed.
LabelSweep sweep_labels(const Dataset& d, const EncoderModel& pretrained, const std::vector<double>& fractions,
                        const std::vector<std::uint64_t>& seeds, const ProbeConfig& cfg, int jobs = 1);

struct QueueSweep {
  SweepTable table;
  std::vector<ProbeResult> runs;
  std::vector<double> final_losses;
};

/// Full contrastive pre-training plus linear probe for every (K, seed).
QueueSweep sweep_queue(const Dataset& d, const EncoderModel& vision, const std::vector<int>& queue_sizes,
                       const std::vector<std::uint64_t>& seeds, const ContrastiveConfig& base,
                       const ProbeConfig& probe, int jobs = 1);

struct Projection {
  MatrixXr coords;  // N x 2
  double explained_variance_ratio = 0;
};

/// Mean-centred projection onto the two leading principal directions. Each
/// direction's first nonzero loading is positive.
Projection project_2d(const MatrixXr& features);

/// Mean distance between class centroids over mean distance of points to
/// their own centroid.
double cluster_separation(const MatrixXr& coords, const LabelVector& labels);

std::string probe_curve_csv(const std::vector<ProbeResult>& runs);
std::string probe_results_csv(const std::vector<ProbeResult>& runs);
std::string sweep_csv(const std::vector<SweepTable>& tables);
std::string projection_csv(const Projection& p, const LabelVector& labels);

}  // namespace xmc

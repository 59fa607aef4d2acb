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

#include "xmc/eval.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "xmc/error.hpp"
#include "xmc/rng.hpp"

namespace xmc {

std::string_view mode_name(ProbeMode m) {
  switch (m) {
    case ProbeMode::kLinearProbe:
      return "linear-probe";
    case ProbeMode::kFineTune:
      return "fine-tune";
    case ProbeMode::kSupervisedBaseline:
      return "supervised-baseline";
  }
  return "unknown";
}

void ProbeConfig::validate() const {
  if (epochs < 1 || baseline_epochs < 1 || batch_size < 1 || embed_dim < 1) {
    throw ConfigError("probe: epochs, baseline_epochs, batch_size and embed_dim must be positive");
  }
  if (lr < 0.0 || momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("probe: lr, momentum and weight decay must be non-negative");
  }
}

LabeledSet extract_features(const EncoderModel& encoder, const Dataset& d, const std::vector<std::uint32_t>& indices) {
  return {encoder.embed(radar_batch(d, indices)), label_batch(d, indices)};
}

std::vector<std::size_t> stratified_subsample(const LabelVector& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("stratified_subsample: fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const auto n = static_cast<std::size_t>(labels.size());
  // A tiny epsilon keeps f*N that is integral in exact arithmetic from rounding up.
  const auto wanted = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  std::array<std::vector<std::size_t>, kNumClasses> buckets;
  for (std::size_t i = 0; i < n; ++i) {
    buckets[labels(static_cast<Eigen::Index>(i))].push_back(i);
  }
  if (wanted < static_cast<std::size_t>(kNumClasses)) {
    throw StratificationError("stratified_subsample: " + std::to_string(wanted) + " labels cannot cover " +
                              std::to_string(kNumClasses) + " classes");
  }
  Rng rng = make_rng(seed, "stratified-subsample");
  std::array<std::size_t, kNumClasses> quota{};
  quota.fill(wanted / kNumClasses);
  std::array<int, kNumClasses> classes{};
  std::iota(classes.begin(), classes.end(), 0);
  std::shuffle(classes.begin(), classes.end(), rng);
  for (std::size_t r = 0; r < wanted % kNumClasses; ++r) {
    ++quota[static_cast<std::size_t>(classes[r])];
  }
  std::vector<std::size_t> out;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& b = buckets[static_cast<std::size_t>(c)];
    if (b.size() < quota[static_cast<std::size_t>(c)] || b.empty()) {
      throw StratificationError("stratified_subsample: class " + std::to_string(c) + " has " +
                                std::to_string(b.size()) + " samples, needs " +
                                std::to_string(quota[static_cast<std::size_t>(c)]));
    }
    std::shuffle(b.begin(), b.end(), rng);
    out.insert(out.end(), b.begin(), b.begin() + static_cast<std::ptrdiff_t>(quota[static_cast<std::size_t>(c)]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double smallest_feasible_fraction(std::size_t n_train) {
  if (n_train < static_cast<std::size_t>(kNumClasses)) {
    throw StratificationError("smallest_feasible_fraction: fewer samples than classes");
  }
  return static_cast<double>(kNumClasses) / static_cast<double>(n_train);
}

namespace {

LabeledSet subset(const LabeledSet& s, const std::vector<std::size_t>& rows) {
  LabeledSet out{MatrixXr(static_cast<Eigen::Index>(rows.size()), s.inputs.cols()),
                 LabelVector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    out.inputs.row(static_cast<Eigen::Index>(k)) = s.inputs.row(r);
    out.labels(static_cast<Eigen::Index>(k)) = s.labels(r);
  }
  return out;
}

ProbeResult summarize_history(const std::vector<EpochRecord>& history, ProbeMode mode, double fraction,
                              int labels_used, std::uint64_t seed) {
  ProbeResult r;
  r.mode = mode;
  r.label_fraction = fraction;
  r.labels_used = labels_used;
  r.seed = seed;
  r.test_accuracy = history.back().test_accuracy;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : history) {
    r.test_loss_curve.push_back({h.epoch, h.test_loss});
    if (h.test_loss < best) {
      best = h.test_loss;
      r.best_epoch = h.epoch;
      r.best_epoch_accuracy = h.test_accuracy;
    }
  }
  return r;
}

SupervisedOptions options_for(const ProbeConfig& cfg, int epochs, bool train_encoder, std::string_view label) {
  SupervisedOptions o;
  o.epochs = epochs;
  o.batch_size = cfg.batch_size;
  o.lr = cfg.lr;
  o.momentum = cfg.momentum;
  o.weight_decay = cfg.weight_decay;
  o.schedule = LrSchedule::kConstant;
  o.train_encoder = train_encoder;
  o.seed = derive_seed(cfg.seed, label);
  return o;
}

struct RadarSplits {
  LabeledSet train;
  LabeledSet test;
};

// The labelled pool is the contrastive part of the train split; the test
// split is only ever evaluated.
RadarSplits radar_splits(const Dataset& d) {
  const auto pool = d.contrastive();
  return {{radar_batch(d, pool), label_batch(d, pool)}, {radar_batch(d, d.test), label_batch(d, d.test)}};
}

}  // namespace

ProbeResult linear_probe(const LabeledSet& train, const LabeledSet& test, double fraction, const ProbeConfig& cfg) {
  cfg.validate();
  const auto rows = stratified_subsample(train.labels, fraction, derive_seed(cfg.seed, "probe-labels"));
  const LabeledSet labelled = subset(train, rows);
  ClassifierHead head(static_cast<int>(train.inputs.cols()), kNumClasses, derive_seed(cfg.seed, "probe-head"));
  const auto history =
      train_supervised(nullptr, head, labelled, &test, options_for(cfg, cfg.epochs, false, "probe-train"));
  return summarize_history(history, ProbeMode::kLinearProbe, fraction, static_cast<int>(rows.size()), cfg.seed);
}

ProbeResult finetune(const EncoderModel& encoder, const Dataset& d, double fraction, const ProbeConfig& cfg,
                     EncoderModel* tuned) {
  cfg.validate();
  const RadarSplits s = radar_splits(d);
  const auto rows = stratified_subsample(s.train.labels, fraction, derive_seed(cfg.seed, "probe-labels"));
  const LabeledSet labelled = subset(s.train, rows);
  EncoderModel model = encoder.clone();
  ClassifierHead head(model.embed_dim(), kNumClasses, derive_seed(cfg.seed, "probe-head"));
  const auto history =
      train_supervised(&model, head, labelled, &s.test, options_for(cfg, cfg.epochs, true, "finetune-train"));
  if (tuned != nullptr) {
    *tuned = std::move(model);
  }
  return summarize_history(history, ProbeMode::kFineTune, fraction, static_cast<int>(rows.size()), cfg.seed);
}

ProbeResult supervised_baseline(const Dataset& d, double fraction, const ProbeConfig& cfg) {
  cfg.validate();
  const RadarSplits s = radar_splits(d);
  const auto rows = stratified_subsample(s.train.labels, fraction, derive_seed(cfg.seed, "probe-labels"));
  const LabeledSet labelled = subset(s.train, rows);
  std::vector<int> dims{d.radar_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.embed_dim);
  EncoderModel model(dims, derive_seed(cfg.seed, "baseline-init"));
  ClassifierHead head(model.embed_dim(), kNumClasses, derive_seed(cfg.seed, "probe-head"));
  const auto history = train_supervised(&model, head, labelled, &s.test,
                                        options_for(cfg, cfg.baseline_epochs, true, "baseline-train"));
  return summarize_history(history, ProbeMode::kSupervisedBaseline, fraction, static_cast<int>(rows.size()),
                           cfg.seed);
}

SweepRow summarize(double axis_value, const std::vector<double>& accuracies) {
  SweepRow row;
  row.axis_value = axis_value;
  row.seeds = static_cast<int>(accuracies.size());
  if (accuracies.empty()) {
    return row;
  }
  row.mean_accuracy = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / row.seeds;
  if (accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : accuracies) {
      ss += (a - row.mean_accuracy) * (a - row.mean_accuracy);
    }
    row.std_accuracy = std::sqrt(ss / (row.seeds - 1));
  }
  return row;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

LabelSweep sweep_labels(const Dataset& d, const EncoderModel& pretrained, const std::vector<double>& fractions,
                        const std::vector<std::uint64_t>& seeds, const ProbeConfig& cfg, int jobs) {
  if (seeds.size() < 3) {
    throw ConfigError("sweep_labels: at least 3 seeds are required");
  }
  const std::size_t arms = fractions.size() * 2 * seeds.size();
  std::vector<ProbeResult> runs(arms);
  parallel_for(arms, jobs, [&](std::size_t i) {
    const std::size_t f = i / (2 * seeds.size());
    const bool supervised = (i / seeds.size()) % 2 == 1;
    ProbeConfig c = cfg;
    c.seed = derive_seed(cfg.seed, "label-sweep", seeds[i % seeds.size()]);
    runs[i] = supervised ? supervised_baseline(d, fractions[f], c) : finetune(pretrained, d, fractions[f], c);
    runs[i].seed = seeds[i % seeds.size()];
  });
  LabelSweep out;
  out.finetune = {"label_fraction", std::string(mode_name(ProbeMode::kFineTune)), {}};
  out.supervised = {"label_fraction", std::string(mode_name(ProbeMode::kSupervisedBaseline)), {}};
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    std::vector<double> ft;
    std::vector<double> sup;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      ft.push_back(runs[f * 2 * seeds.size() + s].test_accuracy);
      sup.push_back(runs[f * 2 * seeds.size() + seeds.size() + s].test_accuracy);
    }
    out.finetune.rows.push_back(summarize(fractions[f], ft));
    out.supervised.rows.push_back(summarize(fractions[f], sup));
  }
  out.runs = std::move(runs);
  return out;
}

QueueSweep sweep_queue(const Dataset& d, const EncoderModel& vision, const std::vector<int>& queue_sizes,
                       const std::vector<std::uint64_t>& seeds, const ContrastiveConfig& base,
                       const ProbeConfig& probe, int jobs) {
  if (seeds.size() < 3) {
    throw ConfigError("sweep_queue: at least 3 seeds are required");
  }
  if (queue_sizes.empty()) {
    throw ConfigError("sweep_queue: empty K list");
  }
  // One batch size for every arm so that K is the only thing that varies.
  const int batch = std::min(base.batch_size, *std::min_element(queue_sizes.begin(), queue_sizes.end()));
  // A smaller batch keeps the number of optimizer steps of the base config.
  const long n = static_cast<long>(d.contrastive().size());
  const long base_steps = base.epochs * ((n + base.batch_size - 1) / base.batch_size);
  const long per_epoch = (n + batch - 1) / batch;
  const int epochs = static_cast<int>(std::max(1L, (base_steps + per_epoch / 2) / per_epoch));
  const LabeledSet test_inputs{radar_batch(d, d.test), label_batch(d, d.test)};
  const auto pool = d.contrastive();
  const LabeledSet train_inputs{radar_batch(d, pool), label_batch(d, pool)};

  const std::size_t arms = queue_sizes.size() * seeds.size();
  QueueSweep out;
  out.runs.resize(arms);
  out.final_losses.resize(arms);
  parallel_for(arms, jobs, [&](std::size_t i) {
    ContrastiveConfig c = base;
    c.queue_size = queue_sizes[i / seeds.size()];
    c.batch_size = batch;
    c.epochs = epochs;
    c.seed = derive_seed(base.seed, "queue-sweep", seeds[i % seeds.size()]);
    const PretrainResult pr = pretrain(d, vision, c);
    ProbeConfig p = probe;
    p.seed = derive_seed(probe.seed, "queue-sweep", seeds[i % seeds.size()]);
    const LabeledSet train{pr.radio.embed(train_inputs.inputs), train_inputs.labels};
    const LabeledSet test{pr.radio.embed(test_inputs.inputs), test_inputs.labels};
    out.runs[i] = linear_probe(train, test, 1.0, p);
    out.runs[i].seed = seeds[i % seeds.size()];
    out.final_losses[i] = pr.history.back().mean_loss;
  });
  out.table = {"K", std::string(mode_name(ProbeMode::kLinearProbe)), {}};
  for (std::size_t k = 0; k < queue_sizes.size(); ++k) {
    std::vector<double> acc;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      acc.push_back(out.runs[k * seeds.size() + s].test_accuracy);
    }
    out.table.rows.push_back(summarize(queue_sizes[k], acc));
  }
  return out;
}

Projection project_2d(const MatrixXr& features) {
  if (features.rows() < 3) {
    throw UsageError("project_2d: need at least 3 points, got " + std::to_string(features.rows()));
  }
  const Eigen::RowVectorXd mean = features.colwise().mean();
  const MatrixXr centered = features.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) {
    throw DegenerateInputError("project_2d: eigendecomposition failed");
  }
  const Eigen::VectorXd& values = es.eigenvalues();  // ascending
  const double total = values.cwiseMax(0.0).sum();
  if (!(total > 1e-300) || !(values(values.size() - 1) > 1e-12 * std::max(1.0, total))) {
    throw DegenerateInputError("project_2d: features have rank 0");
  }
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(features.cols(), 2);
  double kept = 0.0;
  for (int k = 0; k < 2 && k < features.cols(); ++k) {
    const Eigen::Index idx = values.size() - 1 - k;
    Eigen::VectorXd v = es.eigenvectors().col(idx);
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > 1e-12) {
        if (v(j) < 0.0) v = -v;
        break;
      }
    }
    basis.col(k) = v;
    kept += std::max(0.0, values(idx));
  }
  return {centered * basis, kept / total};
}

double cluster_separation(const MatrixXr& coords, const LabelVector& labels) {
  if (coords.rows() != labels.size() || coords.rows() == 0) {
    throw DimensionError("cluster_separation: coords and labels disagree");
  }
  std::vector<Eigen::RowVectorXd> centroids(kNumClasses, Eigen::RowVectorXd::Zero(coords.cols()));
  std::array<int, kNumClasses> counts{};
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    centroids[labels(i)] += coords.row(i);
    ++counts[labels(i)];
  }
  std::vector<int> present;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] > 0) {
      centroids[c] /= counts[c];
      present.push_back(c);
    }
  }
  if (present.size() < 2) {
    throw DegenerateInputError("cluster_separation: need at least two classes");
  }
  double inter = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      inter += (centroids[present[a]] - centroids[present[b]]).norm();
      ++pairs;
    }
  }
  inter /= pairs;
  double intra = 0.0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    intra += (coords.row(i) - centroids[labels(i)]).norm();
  }
  intra /= static_cast<double>(coords.rows());
  if (!(intra > 0.0)) {
    throw DegenerateInputError("cluster_separation: zero intra-class spread");
  }
  return inter / intra;
}

namespace {
std::ostringstream csv_stream() {
  std::ostringstream os;
  os.precision(17);
  return os;
}
}  // namespace

std::string probe_curve_csv(const std::vector<ProbeResult>& runs) {
  auto os = csv_stream();
  os << "mode,label_fraction,seed,epoch,test_loss\n";
  for (const auto& r : runs) {
    for (const auto& p : r.test_loss_curve) {
      os << mode_name(r.mode) << ',' << r.label_fraction << ',' << r.seed << ',' << p.epoch << ',' << p.loss << '\n';
    }
  }
  return os.str();
}

std::string probe_results_csv(const std::vector<ProbeResult>& runs) {
  auto os = csv_stream();
  os << "mode,label_fraction,labels_used,seed,test_accuracy,best_epoch,best_epoch_accuracy\n";
  for (const auto& r : runs) {
    os << mode_name(r.mode) << ',' << r.label_fraction << ',' << r.labels_used << ',' << r.seed << ','
       << r.test_accuracy << ',' << r.best_epoch << ',' << r.best_epoch_accuracy << '\n';
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepTable>& tables) {
  auto os = csv_stream();
  os << "arm,axis,axis_value,mean_accuracy,std_accuracy,seeds\n";
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      os << t.arm << ',' << t.axis << ',' << r.axis_value << ',' << r.mean_accuracy << ',' << r.std_accuracy << ','
         << r.seeds << '\n';
    }
  }
  return os.str();
}

std::string projection_csv(const Projection& p, const LabelVector& labels) {
  auto os = csv_stream();
  os << "x,y,class\n";
  for (Eigen::Index i = 0; i < p.coords.rows(); ++i) {
    os << p.coords(i, 0) << ',' << p.coords(i, 1) << ',' << static_cast<int>(labels(i)) << '\n';
  }
  return os.str();
}

}  // namespace xmc

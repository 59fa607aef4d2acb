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
#include <string>
#include <vector>

#include "xmc/autodiff.hpp"
#include "xmc/datagen.hpp"
#include "xmc/models.hpp"

namespace xmc {

/// Maximum deviation from unit norm accepted for keys, queries and queue entries.
constexpr double kUnitNormTolerance = 1e-9;

enum class NormCheck { kRequireUnit, kNone };

/// FIFO ring of the K most recent key encodings.
class NegativeQueue {
 public:
  NegativeQueue(int capacity, int dim, NormCheck check = NormCheck::kRequireUnit);

  /// Inserts the rows of `keys`; once full, the oldest rows are evicted.
  /// Throws UsageError when more than `capacity` rows arrive at once.
  void enqueue(const MatrixXr& keys);

  int capacity() const { return capacity_; }
  int dim() const { return static_cast<int>(buffer_.cols()); }
  int size() const { return size_; }
  bool full() const { return size_ == capacity_; }
  bool empty() const { return size_ == 0; }

  /// Entries from oldest to newest.
  MatrixXr contents() const;
  /// Live rows in storage order; any order is valid for the loss.
  auto storage() const { return buffer_.topRows(size_); }

 private:
  MatrixXr buffer_;
  int capacity_;
  int size_ = 0;
  int head_ = 0;  // next write slot
  NormCheck check_;
};

/// Mean over the batch of -log softmax_0([q.k+ , q.k_1-, ..., q.k_K-] / tau).
/// Gradient flows to `q` only. With kRequireUnit, q, k_plus and the queue must
/// be unit-norm within kUnitNormTolerance.
ad::Tensor info_nce(const ad::Tensor& q, const MatrixXr& k_plus, const NegativeQueue& queue, double tau,
                    NormCheck check = NormCheck::kRequireUnit);

/// Same loss from precomputed dot products: positives[B], negatives[B x K].
double info_nce_from_scores(const VectorXr& positives, const MatrixXr& negatives, double tau);

struct ContrastiveConfig {
  double tau = 0.07;
  int queue_size = 256;
  int batch_size = 64;
  int epochs = 200;
  double base_lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {256, 256};
  int embed_dim = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ContrastiveEpoch {
  int epoch = 0;
  double lr = 0;
  double mean_loss = 0;
  double uniform_loss = 0;  // ln(K+1)
};

struct PretrainResult {
  EncoderModel radio;
  OptimizerState optimizer;
  std::vector<ContrastiveEpoch> history;
};

/// Trains a radio encoder against a frozen vision encoder on the dataset's
/// contrastive split. Labels are never read.
PretrainResult pretrain(const Dataset& d, const EncoderModel& vision, const ContrastiveConfig& cfg);

/// Unit-norm keys of the frozen vision encoder for `indices`.
MatrixXr encode_keys(const EncoderModel& vision, const Dataset& d, const std::vector<std::uint32_t>& indices);

/// Loss of the radio encoder on one fixed batch against the given queue, no
/// parameter update.
double contrastive_loss(const EncoderModel& radio, const EncoderModel& vision, const Dataset& d,
                        const std::vector<std::uint32_t>& batch, const NegativeQueue& queue, double tau);

std::string contrastive_history_csv(const std::vector<ContrastiveEpoch>& history);

}  // namespace xmc

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

#include "xmc/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xmc/error.hpp"
#include "xmc/numeric.hpp"
#include "xmc/rng.hpp"

namespace xmc {

NegativeQueue::NegativeQueue(int capacity, int dim, NormCheck check)
    : buffer_(std::max(capacity, 0), std::max(dim, 0)), capacity_(capacity), check_(check) {
  if (capacity < 1 || dim < 1) {
    throw ConfigError("NegativeQueue: capacity and dim must be positive");
  }
}

void NegativeQueue::enqueue(const MatrixXr& keys) {
  if (keys.rows() > capacity_) {
    throw UsageError("enqueue: batch of " + std::to_string(keys.rows()) + " exceeds queue capacity " +
                     std::to_string(capacity_));
  }
  if (keys.cols() != buffer_.cols()) {
    throw DimensionError("enqueue: key dim " + std::to_string(keys.cols()) + " vs queue dim " +
                         std::to_string(buffer_.cols()));
  }
  if (check_ == NormCheck::kRequireUnit && max_unit_norm_deviation(keys) > kUnitNormTolerance) {
    throw ContractError("enqueue: keys must be unit-norm");
  }
  for (Eigen::Index r = 0; r < keys.rows(); ++r) {
    buffer_.row(head_) = keys.row(r);
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

MatrixXr NegativeQueue::contents() const {
  MatrixXr out(size_, buffer_.cols());
  const int oldest = full() ? head_ : 0;
  for (int i = 0; i < size_; ++i) {
    out.row(i) = buffer_.row((oldest + i) % capacity_);
  }
  return out;
}

ad::Tensor info_nce(const ad::Tensor& q, const MatrixXr& k_plus, const NegativeQueue& queue, double tau,
                    NormCheck check) {
  if (!(tau > 0.0)) {
    throw DomainError("info_nce: tau must be positive");
  }
  if (queue.empty()) {
    throw UsageError("info_nce: negative queue is empty");
  }
  if (q.rank() != 2 || q.rows() != k_plus.rows() || q.cols() != k_plus.cols() || q.cols() != queue.dim()) {
    throw DimensionError("info_nce: q " + q.shape_string() + ", k_plus [" + std::to_string(k_plus.rows()) + "x" +
                         std::to_string(k_plus.cols()) + "], queue dim " + std::to_string(queue.dim()));
  }
  if (check == NormCheck::kRequireUnit) {
    if (max_unit_norm_deviation(q.value()) > kUnitNormTolerance ||
        max_unit_norm_deviation(k_plus) > kUnitNormTolerance ||
        max_unit_norm_deviation(queue.storage()) > kUnitNormTolerance) {
      throw ContractError("info_nce: q, k_plus and queue entries must be unit-norm");
    }
  }
  const ad::Tensor positives = ad::row_sum(ad::mul(q, ad::Tensor::constant(k_plus)));
  const ad::Tensor negatives = ad::matmul(q, ad::Tensor::constant(queue.storage().transpose()));
  const ad::Tensor logits = ad::scale(ad::concat_cols(positives, negatives), 1.0 / tau);
  const std::vector<int> targets(static_cast<std::size_t>(q.rows()), 0);
  return ad::cross_entropy(logits, targets);
}

double info_nce_from_scores(const VectorXr& positives, const MatrixXr& negatives, double tau) {
  if (!(tau > 0.0)) {
    throw DomainError("info_nce: tau must be positive");
  }
  if (positives.size() != negatives.rows() || negatives.cols() < 1) {
    throw DimensionError("info_nce_from_scores: shape mismatch");
  }
  MatrixXr logits(negatives.rows(), negatives.cols() + 1);
  logits << positives, negatives;
  logits /= tau;
  const VectorXr lse = logsumexp_rows(logits);
  return (lse - logits.col(0)).mean();
}

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) {
    throw ConfigError("contrastive: tau must be positive");
  }
  if (batch_size < 1 || epochs < 1 || embed_dim < 1) {
    throw ConfigError("contrastive: batch_size, epochs and embed_dim must be positive");
  }
  if (queue_size < batch_size) {
    throw ConfigError("contrastive: queue size K=" + std::to_string(queue_size) + " must be >= batch size " +
                      std::to_string(batch_size));
  }
  if (base_lr < 0.0 || momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("contrastive: lr, momentum and weight decay must be non-negative");
  }
}

MatrixXr encode_keys(const EncoderModel& vision, const Dataset& d, const std::vector<std::uint32_t>& indices) {
  return normalize_rows(vision.embed(image_batch(d, indices)));
}

namespace {

MatrixXr take_rows(const MatrixXr& m, std::span<const std::size_t> rows) {
  MatrixXr out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

}  // namespace

PretrainResult pretrain(const Dataset& d, const EncoderModel& vision, const ContrastiveConfig& cfg) {
  cfg.validate();
  if (!vision.frozen()) {
    throw ContractError("pretrain: the vision encoder must be frozen");
  }
  const std::vector<std::uint32_t> pool = d.contrastive();
  if (pool.empty()) {
    throw ConfigError("pretrain: empty contrastive split");
  }
  if (vision.input_dim() != d.image_dim()) {
    throw DimensionError("pretrain: vision encoder expects " + std::to_string(vision.input_dim()) +
                         " inputs, images have " + std::to_string(d.image_dim()));
  }

  std::vector<int> dims{d.radar_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.embed_dim);
  PretrainResult out{EncoderModel(dims, derive_seed(cfg.seed, "radio-init")), {}, {}};
  if (vision.embed_dim() != cfg.embed_dim) {
    throw ConfigError("pretrain: vision embed dim " + std::to_string(vision.embed_dim()) +
                      " differs from radio embed dim " + std::to_string(cfg.embed_dim));
  }

  // The key encoder is frozen, so every key is fixed for the whole run.
  const MatrixXr keys = encode_keys(vision, d, pool);
  const MatrixXr inputs = radar_batch(d, pool);

  std::vector<ad::Tensor> params = out.radio.parameters();
  out.optimizer = make_optimizer_state(params, cfg.base_lr, cfg.momentum, cfg.weight_decay);
  NegativeQueue queue(cfg.queue_size, cfg.embed_dim);

  const std::size_t n = pool.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * cfg.epochs;
  const double uniform = std::log(static_cast<double>(cfg.queue_size) + 1.0);

  std::vector<std::size_t> order(n);
  auto shuffle_for = [&](int epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(cfg.seed, "pretrain-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  };

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_for(epoch);
    if (epoch == 0) {
      // Warm start: fill the queue from the first ceil(K/B) batches.
      const std::size_t warm = std::min(n, batch * ((static_cast<std::size_t>(cfg.queue_size) + batch - 1) / batch));
      for (std::size_t start = 0; start < warm; start += batch) {
        const std::size_t stop = std::min(warm, start + batch);
        queue.enqueue(take_rows(keys, std::span<const std::size_t>(order.data() + start, stop - start)));
      }
    }
    ContrastiveEpoch rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(step, total_steps, cfg.base_lr);
    rec.uniform_loss = uniform;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const MatrixXr k_plus = take_rows(keys, rows);
      out.radio.zero_grad();
      ad::Tensor loss;
      try {
        const ad::Tensor q = ad::l2_normalize(out.radio.forward(ad::Tensor::constant(take_rows(inputs, rows))));
        loss = info_nce(q, k_plus, queue, cfg.tau);
      } catch (const DomainError& e) {
        throw NumericError(std::string("pretrain: ") + e.what(), epoch, step);
      }
      ad::backward(loss);
      out.optimizer.lr = cosine_lr(step, total_steps, cfg.base_lr);
      sgd_step(params, out.optimizer);
      queue.enqueue(k_plus);
      loss_sum += loss.item() * static_cast<double>(rows.size());
      ++step;
    }
    rec.mean_loss = loss_sum / static_cast<double>(n);
    out.history.push_back(rec);
  }
  return out;
}

double contrastive_loss(const EncoderModel& radio, const EncoderModel& vision, const Dataset& d,
                        const std::vector<std::uint32_t>& batch, const NegativeQueue& queue, double tau) {
  const MatrixXr q = normalize_rows(radio.embed(radar_batch(d, batch)));
  const MatrixXr k_plus = encode_keys(vision, d, batch);
  return info_nce(ad::Tensor::constant(q), k_plus, queue, tau).item();
}

std::string contrastive_history_csv(const std::vector<ContrastiveEpoch>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,lr,mean_loss,uniform_loss\n";
  for (const auto& h : history) {
    os << h.epoch << ',' << h.lr << ',' << h.mean_loss << ',' << h.uniform_loss << '\n';
  }
  return os.str();
}

}  // namespace xmc

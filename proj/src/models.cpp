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

#include "xmc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "xmc/error.hpp"
#include "xmc/io.hpp"
#include "xmc/numeric.hpp"
#include "xmc/rng.hpp"

namespace xmc {

namespace {

AffineLayer init_layer(int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (in + out));
  MatrixXr w(in, out);
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    w.data()[k] = uniform(rng, -bound, bound);
  }
  return {ad::Tensor::parameter(std::move(w)), ad::Tensor::parameter_vector(VectorXr::Zero(out))};
}

}  // namespace

EncoderModel::EncoderModel(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) {
    throw ConfigError("EncoderModel: need at least input and output dims");
  }
  if (std::any_of(dims.begin(), dims.end(), [](int d) { return d < 1; })) {
    throw ConfigError("EncoderModel: layer dims must be positive");
  }
  Rng rng = make_rng(seed, "encoder-init");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.push_back(init_layer(dims[i], dims[i + 1], rng));
  }
}

ad::Tensor EncoderModel::forward(const ad::Tensor& x) const {
  if (x.rank() != 2 || x.cols() != input_dim()) {
    throw DimensionError("encoder_forward: expected [Bx" + std::to_string(input_dim()) + "], got " +
                         x.shape_string());
  }
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = ad::add_bias(ad::matmul(h, layers_[i].weight), layers_[i].bias);
    if (i + 1 < layers_.size()) {
      h = ad::relu(h);
    }
  }
  return h;
}

MatrixXr EncoderModel::embed(const MatrixXr& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("encoder_forward: expected " + std::to_string(input_dim()) + " input columns, got " +
                         std::to_string(x.cols()));
  }
  MatrixXr h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    MatrixXr next = h * layers_[i].weight.value();
    next.rowwise() += layers_[i].bias.value().col(0).transpose();
    if (i + 1 < layers_.size()) {
      next = next.cwiseMax(0.0);
    }
    h = std::move(next);
  }
  return h;
}

int EncoderModel::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.rows()); }

int EncoderModel::embed_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.cols()); }

std::vector<int> EncoderModel::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers_) {
    d.push_back(static_cast<int>(l.weight.cols()));
  }
  return d;
}

std::vector<ad::Tensor> EncoderModel::parameters() const {
  std::vector<ad::Tensor> p;
  for (const auto& l : layers_) {
    p.push_back(l.weight);
    p.push_back(l.bias);
  }
  return p;
}

void EncoderModel::zero_grad() {
  for (auto& p : parameters()) {
    p.zero_grad();
  }
}

void EncoderModel::freeze() {
  for (auto& p : parameters()) {
    p.set_requires_grad(false);
  }
  frozen_ = true;
}

EncoderModel EncoderModel::clone() const {
  std::vector<AffineLayer> layers;
  for (const auto& l : layers_) {
    AffineLayer c{ad::Tensor::parameter(l.weight.value()), ad::Tensor::parameter_vector(l.bias.value().col(0))};
    layers.push_back(std::move(c));
  }
  return from_parameters(std::move(layers), false);
}

std::vector<char> EncoderModel::parameter_bytes() const {
  ByteWriter w;
  for (const auto& l : layers_) {
    w.f64s(std::span<const double>(l.weight.value().data(), static_cast<std::size_t>(l.weight.numel())));
    w.f64s(std::span<const double>(l.bias.value().data(), static_cast<std::size_t>(l.bias.numel())));
  }
  return w.buffer();
}

EncoderModel EncoderModel::from_parameters(std::vector<AffineLayer> layers, bool frozen) {
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].weight.cols() != layers[i + 1].weight.rows()) {
      throw DimensionError("EncoderModel: consecutive layer dims disagree at layer " + std::to_string(i));
    }
  }
  EncoderModel m;
  m.layers_ = std::move(layers);
  if (frozen) {
    m.freeze();
  }
  return m;
}

ClassifierHead::ClassifierHead(int in_dim, int num_classes, std::uint64_t seed) {
  Rng rng = make_rng(seed, "head-init");
  layer_ = init_layer(in_dim, num_classes, rng);
}

ad::Tensor ClassifierHead::forward(const ad::Tensor& features) const {
  return ad::add_bias(ad::matmul(features, layer_.weight), layer_.bias);
}

void ClassifierHead::zero_grad() {
  layer_.weight.zero_grad();
  layer_.bias.zero_grad();
}

OptimizerState make_optimizer_state(std::span<const ad::Tensor> params, double lr, double momentum,
                                    double weight_decay) {
  OptimizerState st;
  st.lr = lr;
  st.momentum = momentum;
  st.weight_decay = weight_decay;
  for (const auto& p : params) {
    st.velocity.push_back(MatrixXr::Zero(p.rows(), p.cols()));
  }
  return st;
}

void sgd_step(std::span<ad::Tensor> params, OptimizerState& state) {
  if (params.size() != state.velocity.size()) {
    throw UsageError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(state.velocity.size()) + " velocity buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].requires_grad()) {
      continue;
    }
    if (!params[i].has_grad()) {
      throw UsageError("sgd_step: trainable parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.velocity[i].rows() != params[i].rows() || state.velocity[i].cols() != params[i].cols()) {
      throw DimensionError("sgd_step: velocity shape mismatch at parameter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].requires_grad()) {
      continue;
    }
    MatrixXr& p = params[i].mutable_value();
    MatrixXr& v = state.velocity[i];
    v = state.momentum * v + (params[i].node()->grad + state.weight_decay * p);
    p -= state.lr * v;
  }
  ++state.step_count;
}

double cosine_lr(long t, long total, double base) {
  if (total < 1) {
    throw DomainError("cosine_lr: total steps must be >= 1");
  }
  if (t < 0 || t > total) {
    throw DomainError("cosine_lr: step " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  }
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total)));
}

namespace {

MatrixXr take_rows(const MatrixXr& m, std::span<const std::size_t> rows) {
  MatrixXr out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

Evaluation evaluate_features(const MatrixXr& features, const ClassifierHead& head, const LabelVector& labels) {
  const auto params = head.parameters();
  MatrixXr logits = features * params[0].value();
  logits.rowwise() += params[1].value().col(0).transpose();
  const VectorXr lse = logsumexp_rows(logits);
  const Eigen::VectorXi pred = argmax_rows(logits);
  Evaluation e;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    e.loss += lse(i) - logits(i, labels(i));
    e.accuracy += pred(i) == labels(i) ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(std::max<Eigen::Index>(1, labels.size()));
  e.loss /= n;
  e.accuracy /= n;
  return e;
}

}  // namespace

Evaluation evaluate_classifier(const EncoderModel* encoder, const ClassifierHead& head, const LabeledSet& set) {
  return evaluate_features(encoder != nullptr ? encoder->embed(set.inputs) : set.inputs, head, set.labels);
}

std::vector<EpochRecord> train_supervised(EncoderModel* encoder, ClassifierHead& head, const LabeledSet& train,
                                          const LabeledSet* eval, const SupervisedOptions& opts) {
  if (opts.epochs < 1 || opts.batch_size < 1) {
    throw ConfigError("train_supervised: epochs and batch_size must be positive");
  }
  if (train.inputs.rows() == 0 || train.inputs.rows() != train.labels.size()) {
    throw ConfigError("train_supervised: empty or inconsistent training set");
  }
  if (opts.train_encoder && (encoder == nullptr || encoder->frozen())) {
    throw UsageError("train_supervised: cannot fine-tune a missing or frozen encoder");
  }
  std::vector<ad::Tensor> params = head.parameters();
  if (opts.train_encoder) {
    for (auto& p : encoder->parameters()) {
      params.push_back(p);
    }
  }
  OptimizerState st = make_optimizer_state(params, opts.lr, opts.momentum, opts.weight_decay);

  // A fixed encoder is evaluated once up front.
  MatrixXr fixed_features;
  if (!opts.train_encoder) {
    fixed_features = encoder != nullptr ? encoder->embed(train.inputs) : train.inputs;
  }

  const auto n = static_cast<std::size_t>(train.inputs.rows());
  const long steps_per_epoch = static_cast<long>((n + opts.batch_size - 1) / opts.batch_size);
  const long total_steps = steps_per_epoch * opts.epochs;
  std::vector<std::size_t> order(n);
  std::vector<EpochRecord> history;
  long step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(opts.seed, "supervised-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(opts.batch_size));
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      std::vector<int> targets(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        targets[k] = train.labels(static_cast<Eigen::Index>(rows[k]));
      }
      for (auto& p : params) {
        p.zero_grad();
      }
      ad::Tensor loss;
      try {
        const ad::Tensor features = opts.train_encoder
                                        ? encoder->forward(ad::Tensor::constant(take_rows(train.inputs, rows)))
                                        : ad::Tensor::constant(take_rows(fixed_features, rows));
        loss = ad::cross_entropy(head.forward(features), targets);
      } catch (const DomainError& e) {
        throw NumericError(std::string("train_supervised: ") + e.what(), epoch + 1, step);
      }
      ad::backward(loss);
      st.lr = opts.schedule == LrSchedule::kCosine ? cosine_lr(step, total_steps, opts.lr) : opts.lr;
      sgd_step(params, st);
      loss_sum += loss.item() * static_cast<double>(rows.size());
      ++step;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(n);
    if (eval != nullptr) {
      const Evaluation e = evaluate_classifier(encoder, head, *eval);
      rec.test_loss = e.loss;
      rec.test_accuracy = e.accuracy;
    }
    history.push_back(rec);
  }
  return history;
}

VisionResult pretrain_vision(const Dataset& d, const VisionConfig& cfg) {
  std::vector<int> dims{d.image_dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.embed_dim);
  VisionResult out{EncoderModel(dims, derive_seed(cfg.seed, "vision-encoder")), {}};
  if (cfg.mode == VisionMode::kRandomFrozen) {
    out.encoder.freeze();
    return out;
  }
  if (d.vision.empty()) {
    throw ConfigError("pretrain_vision: the dataset has no vision-pretraining split");
  }
  std::vector<std::uint32_t> vision = d.vision;
  std::sort(vision.begin(), vision.end());
  const auto overlaps = [&](const std::vector<std::uint32_t>& other) {
    return std::any_of(other.begin(), other.end(),
                       [&](std::uint32_t i) { return std::binary_search(vision.begin(), vision.end(), i); });
  };
  if (overlaps(d.contrastive()) || overlaps(d.test)) {
    throw ConfigError("pretrain_vision: vision split overlaps the contrastive or test split");
  }
  ClassifierHead head(cfg.embed_dim, kNumClasses, derive_seed(cfg.seed, "vision-head"));
  LabeledSet train{image_batch(d, vision), label_batch(d, vision)};
  LabeledSet eval{image_batch(d, d.test), label_batch(d, d.test)};
  SupervisedOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.lr = cfg.lr;
  opts.momentum = cfg.momentum;
  opts.weight_decay = cfg.weight_decay;
  opts.schedule = LrSchedule::kCosine;
  opts.train_encoder = true;
  opts.seed = derive_seed(cfg.seed, "vision-train");
  out.history = train_supervised(&out.encoder, head, train, &eval, opts);
  out.encoder.freeze();
  return out;
}

std::vector<char> encode_checkpoint(const EncoderModel& m, const OptimizerState* opt) {
  ByteWriter w;
  w.bytes("XMCK");
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(m.num_layers()));
  for (const auto& l : m.layers()) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows()));
    w.u32(static_cast<std::uint32_t>(l.weight.cols()));
  }
  w.u8(m.frozen() ? 1 : 0);
  const auto params = m.parameter_bytes();
  w.bytes(std::string_view(params.data(), params.size()));
  w.u8(opt != nullptr ? 1 : 0);
  if (opt != nullptr) {
    w.f64(opt->lr);
    w.f64(opt->momentum);
    w.f64(opt->weight_decay);
    w.u64(opt->step_count);
    w.u32(static_cast<std::uint32_t>(opt->velocity.size()));
    for (const auto& v : opt->velocity) {
      w.u32(static_cast<std::uint32_t>(v.rows()));
      w.u32(static_cast<std::uint32_t>(v.cols()));
      w.f64s(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    }
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const char> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "XMCK") {
    throw FormatError("checkpoint: bad magic");
  }
  if (const auto v = r.u16(); v != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(v));
  }
  const auto count = r.u32();
  if (count == 0 || count > 1024) {
    throw FormatError("checkpoint: implausible layer count " + std::to_string(count));
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(count);
  for (auto& [in, out] : dims) {
    in = r.u32();
    out = r.u32();
  }
  const bool frozen = r.u8() != 0;
  std::vector<AffineLayer> layers;
  for (const auto& [in, out] : dims) {
    MatrixXr w(in, out);
    VectorXr b(out);
    r.f64s(std::span<double>(w.data(), static_cast<std::size_t>(w.size())));
    r.f64s(std::span<double>(b.data(), static_cast<std::size_t>(b.size())));
    layers.push_back({ad::Tensor::parameter(std::move(w)), ad::Tensor::parameter_vector(b)});
  }
  Checkpoint ck{EncoderModel::from_parameters(std::move(layers), frozen), std::nullopt};
  if (r.u8() != 0) {
    OptimizerState st;
    st.lr = r.f64();
    st.momentum = r.f64();
    st.weight_decay = r.f64();
    st.step_count = r.u64();
    const auto nv = r.u32();
    for (std::uint32_t i = 0; i < nv; ++i) {
      const auto rows = r.u32();
      const auto cols = r.u32();
      MatrixXr v(rows, cols);
      r.f64s(std::span<double>(v.data(), static_cast<std::size_t>(v.size())));
      st.velocity.push_back(std::move(v));
    }
    ck.optimizer = std::move(st);
  }
  if (!r.at_end()) {
    throw FormatError("checkpoint: trailing bytes");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& p, const EncoderModel& m, const OptimizerState* opt) {
  write_file_atomic(p, encode_checkpoint(m, opt));
}

Checkpoint load_checkpoint(const std::filesystem::path& p) { return decode_checkpoint(read_file(p)); }

}  // namespace xmc

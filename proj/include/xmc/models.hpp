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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmc/autodiff.hpp"
#include "xmc/datagen.hpp"
#include "xmc/types.hpp"

namespace xmc {

struct AffineLayer {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // [out]
};

/// Stack of affine layers with relu between consecutive layers and none after
/// the last one. A single layer is a plain affine map.
class EncoderModel {
 public:
  EncoderModel() = default;
  /// dims = {in, h1, ..., out}. Weights are uniform in +-sqrt(6/(fan_in+fan_out)),
  /// biases zero.
  EncoderModel(const std::vector<int>& dims, std::uint64_t seed);

  ad::Tensor forward(const ad::Tensor& x) const;
  /// Inference without graph recording on a trainable model.
  MatrixXr embed(const MatrixXr& x) const;

  int input_dim() const;
  int embed_dim() const;
  std::vector<int> dims() const;
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<AffineLayer>& layers() const { return layers_; }

  std::vector<ad::Tensor> parameters() const;
  void zero_grad();

  /// Clears requires_grad on every parameter.
  void freeze();
  bool frozen() const { return frozen_; }

  /// Trainable deep copy with fresh parameter leaves.
  EncoderModel clone() const;

  /// Raw little-endian parameter bytes, in layer order.
  std::vector<char> parameter_bytes() const;

  /// Used by checkpoint loading.
  static EncoderModel from_parameters(std::vector<AffineLayer> layers, bool frozen);

 private:
  std::vector<AffineLayer> layers_;
  bool frozen_ = false;
};

/// Linear softmax classifier on top of an embedding.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int in_dim, int num_classes, std::uint64_t seed);

  ad::Tensor forward(const ad::Tensor& features) const;
  std::vector<ad::Tensor> parameters() const { return {layer_.weight, layer_.bias}; }
  void zero_grad();
  int num_classes() const { return static_cast<int>(layer_.weight.cols()); }
  bool linear_only() const { return true; }

 private:
  AffineLayer layer_;
};

struct OptimizerState {
  std::vector<MatrixXr> velocity;
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t step_count = 0;
};

OptimizerState make_optimizer_state(std::span<const ad::Tensor> params, double lr, double momentum,
                                    double weight_decay);

/// v <- momentum * v + (g + weight_decay * p); p <- p - lr * v.
/// Skips parameters that do not require grad.
void sgd_step(std::span<ad::Tensor> params, OptimizerState& state);

/// base * (1 + cos(pi * t / T)) / 2.
double cosine_lr(long t, long total, double base);

enum class LrSchedule { kConstant, kCosine };

struct SupervisedOptions {
  int epochs = 32;
  int batch_size = 32;
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  LrSchedule schedule = LrSchedule::kConstant;
  bool train_encoder = false;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double test_loss = 0;
  double test_accuracy = 0;
};

/// Inputs and labels for one split.
struct LabeledSet {
  MatrixXr inputs;
  LabelVector labels;
};

/// Cross-entropy training of head (and optionally encoder). A null encoder
/// means the inputs already are features. When `eval` is given, its loss and
/// accuracy are recorded after every epoch; it never contributes gradients.
std::vector<EpochRecord> train_supervised(EncoderModel* encoder, ClassifierHead& head, const LabeledSet& train,
                                          const LabeledSet* eval, const SupervisedOptions& opts);

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
};
Evaluation evaluate_classifier(const EncoderModel* encoder, const ClassifierHead& head, const LabeledSet& set);

enum class VisionMode { kTrained, kRandomFrozen };

struct VisionConfig {
  VisionMode mode = VisionMode::kTrained;
  std::vector<int> hidden = {256, 256};
  int embed_dim = 128;
  int epochs = 60;
  int batch_size = 32;
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

struct VisionResult {
  EncoderModel encoder;
  std::vector<EpochRecord> history;
};

/// Supervised image->class training on the dataset's vision split, then
/// freeze. Throws ConfigError when the vision split overlaps the rest of
/// training or is empty in trained mode.
VisionResult pretrain_vision(const Dataset& d, const VisionConfig& cfg);

// Checkpoints: "XMCK", u16 version, u32 layer count, per layer u32 in and
// u32 out, u8 frozen, then per layer weight (in*out f64, row-major) and bias
// (out f64), then u8 has_optimizer and, when set, lr, momentum, weight_decay
// f64, step_count u64 and one velocity buffer per parameter.
constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  EncoderModel model;
  std::optional<OptimizerState> optimizer;
};

std::vector<char> encode_checkpoint(const EncoderModel& m, const OptimizerState* opt = nullptr);
Checkpoint decode_checkpoint(std::span<const char> bytes);
void save_checkpoint(const std::filesystem::path& p, const EncoderModel& m, const OptimizerState* opt = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& p);

}  // namespace xmc

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
#include <optional>
#include <string>
#include <vector>

#include "xmc/datagen.hpp"
#include "xmc/models.hpp"

namespace xmc {

struct MiEstimate {
  int k_negatives = 0;
  double mean_loss = 0;
  double mi_lower_bound = 0;
  std::optional<double> true_mi;
  // Run identity, for reporting.
  double rho = 0;
  int dim = 0;
  std::uint64_t seed = 0;
};

/// ln(k) - mean_loss. The raw value is returned even when negative.
double mi_lower_bound(double mean_loss, int k);

/// Critic for the Gaussian oracle: score(x, y) = f(lift(x)) . lift(y) / tau
/// where f is a trained affine map and lift(u) = (u, u*u). The key side is
/// fixed, so queued encodings never go stale.
struct CriticConfig {
  /// Appends squared coordinates to the critic inputs.
  bool quadratic_lift = true;
  double tau = 1.0;
  int batch_size = 32;
  double lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.0;
  /// Held-out pairs used for the reported loss.
  int eval_pairs = 4096;

  void validate() const;
};

/// Encoder input of one side of the critic.
MatrixXr lift_inputs(const MatrixXr& u, bool quadratic);

struct MiCritic {
  EncoderModel f;  // x side; the y side is lift_inputs alone
  bool quadratic_lift = true;
  double tau = 1.0;
};

/// Held-out InfoNCE loss of `critic` with K negatives per positive: row i is
/// scored against the y-encodings of rows i+1, ..., i+K (cyclically).
double heldout_loss(const MiCritic& critic, const GaussianPairs& pairs, int k);

/// Trains the critic for `steps` SGD steps on fresh pairs from `cfg` with a
/// FIFO queue of the K most recent y-encodings as negatives, then
/// evaluates the loss on held-out pairs. `cfg.count` is ignored.
MiEstimate estimate_mi_gaussian(const GaussianPairConfig& cfg, const CriticConfig& critic, int k, int steps,
                                MiCritic* trained = nullptr);

/// rho, dim, K, seed, mean_loss, mi_lower_bound, true_mi.
std::string mi_csv(const std::vector<MiEstimate>& rows);

}  // namespace xmc

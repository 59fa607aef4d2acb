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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmc/rng.hpp"
#include "xmc/types.hpp"

namespace xmc {

// ---------------------------------------------------------------------------
// Correlated Gaussian pairs with closed-form mutual information.

struct GaussianPairConfig {
  int dim = 1;
  double rho = 0.0;
  int count = 1;
  std::uint64_t seed = 0;
};

/// Rows of `x` and `y` are paired samples.
struct GaussianPairs {
  MatrixXr x;
  MatrixXr y;
};

/// Each coordinate pair is standard bivariate normal with correlation rho,
/// independent across coordinates and rows.
GaussianPairs gen_gaussian_pairs(const GaussianPairConfig& cfg);

/// -(dim/2) ln(1 - rho^2), in nats.
double analytic_mi(double rho, int dim);

// ---------------------------------------------------------------------------
// Synthetic radar/camera scenes.

enum class SceneClass : std::uint8_t { kEmpty = 0, kPedestrian = 1, kCyclist = 2, kCar = 3 };

std::string_view class_name(SceneClass c);

/// Class-conditional target statistics; all bounds are inclusive-exclusive uniform ranges.
struct ClassSignature {
  double extent_lo, extent_hi;
  double reflectivity_lo, reflectivity_hi;
};

/// Signature table for the three target classes. Throws for kEmpty.
const ClassSignature& class_signature(SceneClass c);

struct Target {
  double range_m = 0;
  double azimuth_rad = 0;
  double extent_m = 0;
  double reflectivity = 0;
};

struct SceneLatent {
  SceneClass class_id = SceneClass::kEmpty;
  std::optional<Target> target;  // absent exactly when class_id == kEmpty
};

struct SimConfig {
  int range_bins = 32;
  int azimuth_bins = 32;
  int image_height = 32;
  int image_width = 32;
  double range_min_m = 1.0;
  double range_max_m = 25.0;
  double azimuth_max_rad = 1.0471975511965976;  // pi/3
  /// Radar point-spread standard deviation in cells per metre of extent.
  double radar_spread_per_m = 1.6;
  /// Radar noise; a negative value selects 5% of the weakest far-range peak.
  double radar_noise = -1.0;
  double image_noise = 0.05;
  /// Apparent size in pixels per metre at 1 m; shrinks as 1/sqrt(range).
  double image_size_gain = 16.0;
  /// Camera height above ground in metres; places the ground contact row.
  double camera_height_m = 1.2;
  /// Fraction of all samples reserved for training the vision teacher.
  double vision_fraction = 0.2;
  /// Fraction of all samples held out for evaluation.
  double test_fraction = 0.2;

  /// Resolved radar noise standard deviation.
  double radar_sigma() const;
  double focal_px() const;
  void validate() const;
};

/// Draws the latent for one scene of the given class.
SceneLatent sample_scene(SceneClass c, Rng& rng, const SimConfig& cfg);

/// Noiseless peak amplitude of a target: reflectivity / range^2.
double radar_peak(const Target& t);

/// Fractional (range, azimuth) cell coordinates of a target.
std::array<double, 2> radar_cell(const Target& t, const SimConfig& cfg);

/// R x A heatmap. `rng` is only consumed when the resolved noise is positive.
MatrixXr render_radar(const SceneLatent& s, const SimConfig& cfg, Rng& rng);

/// Image-plane bounding box of a target's patch, in pixel units.
struct PatchBox {
  double row_top, row_bottom, col_left, col_right;
  double center_col() const { return 0.5 * (col_left + col_right); }
  double center_row() const { return 0.5 * (row_top + row_bottom); }
  double height() const { return row_bottom - row_top; }
  double width() const { return col_right - col_left; }
};

/// Projects a target into the image. Throws ResampleError when the patch
/// leaves the frame.
PatchBox project_target(SceneClass c, const Target& t, const SimConfig& cfg);

/// H x W image. Throws ResampleError when the target leaves the frame.
MatrixXr render_image(const SceneLatent& s, const SimConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Datasets.

struct PairedSample {
  MatrixXr heatmap;
  MatrixXr image;
  std::uint8_t class_id = 0;
  std::uint32_t t = 0;
};

struct Dataset {
  int range_bins = 0;
  int azimuth_bins = 0;
  int image_height = 0;
  int image_width = 0;
  std::vector<PairedSample> samples;
  /// Disjoint index lists covering all samples.
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> test;
  /// Subset of `train` reserved for the vision teacher.
  std::vector<std::uint32_t> vision;

  std::size_t size() const { return samples.size(); }
  int radar_dim() const { return range_bins * azimuth_bins; }
  int image_dim() const { return image_height * image_width; }
  /// Train indices not reserved for the teacher.
  std::vector<std::uint32_t> contrastive() const;
  /// Checks the split invariants; throws ConfigError on violation.
  void validate_splits() const;
};

/// n samples, classes balanced to within one, stratified splits, fully
/// determined by (cfg, n, seed).
Dataset make_dataset(const SimConfig& cfg, int n, std::uint64_t seed);

/// Per-class counts of the labels at `indices`.
std::array<int, kNumClasses> class_counts(const Dataset& d, const std::vector<std::uint32_t>& indices);

/// Encoder inputs: heatmaps are scaled to unit peak, images are used as-is.
/// One flattened sample per row.
MatrixXr radar_batch(const Dataset& d, const std::vector<std::uint32_t>& indices);
MatrixXr image_batch(const Dataset& d, const std::vector<std::uint32_t>& indices);
LabelVector label_batch(const Dataset& d, const std::vector<std::uint32_t>& indices);

}  // namespace xmc

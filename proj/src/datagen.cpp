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

#include "xmc/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmc/error.hpp"

namespace xmc {

GaussianPairs gen_gaussian_pairs(const GaussianPairConfig& cfg) {
  if (!(std::abs(cfg.rho) < 1.0)) {
    throw ConfigError("gen_gaussian_pairs: |rho| must be < 1, got " + std::to_string(cfg.rho));
  }
  if (cfg.dim < 1 || cfg.count < 1) {
    throw ConfigError("gen_gaussian_pairs: dim and count must be positive");
  }
  GaussianPairs out{MatrixXr(cfg.count, cfg.dim), MatrixXr(cfg.count, cfg.dim)};
  const double c = std::sqrt(1.0 - cfg.rho * cfg.rho);
  Rng rng = make_rng(cfg.seed, "gaussian-pairs");
  for (int i = 0; i < cfg.count; ++i) {
    for (int j = 0; j < cfg.dim; ++j) {
      const double a = standard_normal(rng);
      const double b = standard_normal(rng);
      out.x(i, j) = a;
      out.y(i, j) = cfg.rho * a + c * b;
    }
  }
  return out;
}

double analytic_mi(double rho, int dim) {
  if (!(std::abs(rho) < 1.0)) {
    throw DomainError("analytic_mi: |rho| must be < 1, got " + std::to_string(rho));
  }
  if (dim < 1) {
    throw DomainError("analytic_mi: dim must be positive");
  }
  return -0.5 * dim * std::log1p(-rho * rho);
}

std::string_view class_name(SceneClass c) {
  switch (c) {
    case SceneClass::kEmpty:
      return "empty";
    case SceneClass::kPedestrian:
      return "pedestrian";
    case SceneClass::kCyclist:
      return "cyclist";
    case SceneClass::kCar:
      return "car";
  }
  return "unknown";
}

const ClassSignature& class_signature(SceneClass c) {
  static const ClassSignature pedestrian{0.3, 0.6, 0.5, 1.0};
  static const ClassSignature cyclist{0.8, 1.3, 1.0, 2.0};
  static const ClassSignature car{1.5, 2.5, 3.0, 6.0};
  switch (c) {
    case SceneClass::kPedestrian:
      return pedestrian;
    case SceneClass::kCyclist:
      return cyclist;
    case SceneClass::kCar:
      return car;
    default:
      throw UsageError("class_signature: the empty class has no target");
  }
}

double SimConfig::radar_sigma() const {
  if (radar_noise >= 0.0) {
    return radar_noise;
  }
  // 5% of the weakest possible return: a minimum-reflectivity pedestrian at
  // the far edge of the range interval.
  const double weakest = class_signature(SceneClass::kPedestrian).reflectivity_lo / (range_max_m * range_max_m);
  return 0.05 * weakest;
}

double SimConfig::focal_px() const { return (0.5 * image_width - 0.5) / std::tan(azimuth_max_rad); }

void SimConfig::validate() const {
  if (range_bins < 2 || azimuth_bins < 2 || image_height < 4 || image_width < 4) {
    throw ConfigError("sim: grid sizes too small");
  }
  if (!(range_min_m > 0.0) || !(range_max_m > range_min_m)) {
    throw ConfigError("sim: need 0 < range_min_m < range_max_m");
  }
  if (!(azimuth_max_rad > 0.0) || !(azimuth_max_rad < 1.5)) {
    throw ConfigError("sim: azimuth_max_rad must be in (0, 1.5)");
  }
  if (!(radar_spread_per_m > 0.0) || !(image_size_gain > 0.0) || !(camera_height_m > 0.0)) {
    throw ConfigError("sim: spread, size gain and camera height must be positive");
  }
  if (image_noise < 0.0) {
    throw ConfigError("sim: image_noise must be non-negative");
  }
  if (!(vision_fraction >= 0.0) || !(test_fraction > 0.0) || !(vision_fraction + test_fraction < 1.0)) {
    throw ConfigError("sim: need test_fraction > 0, vision_fraction >= 0 and their sum < 1");
  }
}

SceneLatent sample_scene(SceneClass c, Rng& rng, const SimConfig& cfg) {
  SceneLatent s{c, std::nullopt};
  if (c == SceneClass::kEmpty) {
    return s;
  }
  const ClassSignature& sig = class_signature(c);
  Target t;
  t.range_m = uniform(rng, cfg.range_min_m, cfg.range_max_m);
  t.azimuth_rad = uniform(rng, -cfg.azimuth_max_rad, cfg.azimuth_max_rad);
  t.extent_m = uniform(rng, sig.extent_lo, sig.extent_hi);
  t.reflectivity = uniform(rng, sig.reflectivity_lo, sig.reflectivity_hi);
  s.target = t;
  return s;
}

double radar_peak(const Target& t) { return t.reflectivity / (t.range_m * t.range_m); }

std::array<double, 2> radar_cell(const Target& t, const SimConfig& cfg) {
  const double r = (t.range_m - cfg.range_min_m) / (cfg.range_max_m - cfg.range_min_m) * (cfg.range_bins - 1);
  const double a = (t.azimuth_rad + cfg.azimuth_max_rad) / (2.0 * cfg.azimuth_max_rad) * (cfg.azimuth_bins - 1);
  return {r, a};
}

MatrixXr render_radar(const SceneLatent& s, const SimConfig& cfg, Rng& rng) {
  MatrixXr heat = MatrixXr::Zero(cfg.range_bins, cfg.azimuth_bins);
  if (s.target) {
    const Target& t = *s.target;
    const auto [rc, ac] = radar_cell(t, cfg);
    const double peak = radar_peak(t);
    const double sigma = cfg.radar_spread_per_m * t.extent_m;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int i = 0; i < cfg.range_bins; ++i) {
      for (int j = 0; j < cfg.azimuth_bins; ++j) {
        const double d2 = (i - rc) * (i - rc) + (j - ac) * (j - ac);
        heat(i, j) = peak * std::exp(-d2 * inv2s2);
      }
    }
  }
  const double noise = cfg.radar_sigma();
  if (noise > 0.0) {
    for (Eigen::Index k = 0; k < heat.size(); ++k) {
      heat.data()[k] += std::abs(noise * standard_normal(rng));
    }
  }
  return heat;
}

namespace {

// Patch dimensions in metres: width and height.
std::array<double, 2> patch_size_m(SceneClass c, double extent) {
  switch (c) {
    case SceneClass::kPedestrian:
      return {extent, 3.0 * extent};
    case SceneClass::kCyclist:
      return {extent, extent};
    case SceneClass::kCar:
      return {extent, 0.5 * extent};
    default:
      return {0.0, 0.0};
  }
}

// Shape mask in the unit square (u right, v down).
bool inside_shape(SceneClass c, double u, double v) {
  if (c == SceneClass::kCyclist) {
    // Band along the rising diagonal.
    return std::abs(u - (1.0 - v)) < 0.3;
  }
  return true;
}

constexpr int kSuperSample = 4;

}  // namespace

PatchBox project_target(SceneClass c, const Target& t, const SimConfig& cfg) {
  const double f = cfg.focal_px();
  const double horizon = 0.35 * cfg.image_height;
  const double px_per_m = cfg.image_size_gain / std::sqrt(t.range_m);
  const auto [w_m, h_m] = patch_size_m(c, t.extent_m);
  const double center_col = 0.5 * cfg.image_width + f * std::tan(t.azimuth_rad);
  const double bottom = horizon + f * cfg.camera_height_m / t.range_m;
  PatchBox box{bottom - h_m * px_per_m, bottom, center_col - 0.5 * w_m * px_per_m,
               center_col + 0.5 * w_m * px_per_m};
  if (box.row_top < 0.0 || box.row_bottom > cfg.image_height || box.col_left < 0.0 ||
      box.col_right > cfg.image_width) {
    throw ResampleError("render_image: target projects outside the frame");
  }
  return box;
}

MatrixXr render_image(const SceneLatent& s, const SimConfig& cfg, Rng& rng) {
  MatrixXr img = MatrixXr::Zero(cfg.image_height, cfg.image_width);
  if (s.target) {
    const PatchBox box = project_target(s.class_id, *s.target, cfg);
    const int r0 = static_cast<int>(std::floor(box.row_top));
    const int r1 = std::min(cfg.image_height - 1, static_cast<int>(std::floor(box.row_bottom)));
    const int c0 = static_cast<int>(std::floor(box.col_left));
    const int c1 = std::min(cfg.image_width - 1, static_cast<int>(std::floor(box.col_right)));
    constexpr double step = 1.0 / kSuperSample;
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        int hits = 0;
        for (int a = 0; a < kSuperSample; ++a) {
          for (int b = 0; b < kSuperSample; ++b) {
            const double y = r + (a + 0.5) * step;
            const double x = c + (b + 0.5) * step;
            const double v = (y - box.row_top) / box.height();
            const double u = (x - box.col_left) / box.width();
            if (u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0 && inside_shape(s.class_id, u, v)) {
              ++hits;
            }
          }
        }
        img(r, c) = static_cast<double>(hits) / (kSuperSample * kSuperSample);
      }
    }
  }
  if (cfg.image_noise > 0.0) {
    for (Eigen::Index k = 0; k < img.size(); ++k) {
      img.data()[k] += cfg.image_noise * standard_normal(rng);
    }
  }
  return img;
}

std::vector<std::uint32_t> Dataset::contrastive() const {
  std::vector<std::uint32_t> v = vision;
  std::sort(v.begin(), v.end());
  std::vector<std::uint32_t> out;
  for (std::uint32_t i : train) {
    if (!std::binary_search(v.begin(), v.end(), i)) {
      out.push_back(i);
    }
  }
  return out;
}

void Dataset::validate_splits() const {
  std::vector<int> seen(samples.size(), 0);
  for (auto i : train) {
    if (i >= samples.size()) throw ConfigError("split: train index out of range");
    ++seen[i];
  }
  for (auto i : test) {
    if (i >= samples.size()) throw ConfigError("split: test index out of range");
    ++seen[i];
  }
  if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
    throw ConfigError("split: train and test must be disjoint and cover every sample");
  }
  std::vector<std::uint32_t> tr = train;
  std::sort(tr.begin(), tr.end());
  for (auto i : vision) {
    if (!std::binary_search(tr.begin(), tr.end(), i)) {
      throw ConfigError("split: vision indices must come from the train split");
    }
  }
}

std::array<int, kNumClasses> class_counts(const Dataset& d, const std::vector<std::uint32_t>& indices) {
  std::array<int, kNumClasses> counts{};
  for (auto i : indices) {
    ++counts[d.samples[i].class_id];
  }
  return counts;
}

namespace {

PairedSample generate_sample(const SimConfig& cfg, SceneClass c, std::uint64_t seed, std::uint32_t t) {
  Rng rng = make_rng(seed, "sample", t);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const SceneLatent latent = sample_scene(c, rng, cfg);
    if (latent.target) {
      try {
        project_target(c, *latent.target, cfg);
      } catch (const ResampleError&) {
        continue;
      }
    }
    PairedSample s;
    s.heatmap = render_radar(latent, cfg, rng);
    s.image = render_image(latent, cfg, rng);
    s.class_id = static_cast<std::uint8_t>(c);
    s.t = t;
    return s;
  }
  throw ConfigError("make_dataset: could not place a target inside the image frame");
}

// Takes round(fraction * n_c) from each class bucket, in bucket order.
std::vector<std::uint32_t> take_stratified(std::array<std::vector<std::uint32_t>, kNumClasses>& buckets,
                                           double fraction) {
  std::vector<std::uint32_t> out;
  for (auto& b : buckets) {
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(b.size()) + 0.5));
    out.insert(out.end(), b.end() - static_cast<std::ptrdiff_t>(k), b.end());
    b.resize(b.size() - k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset make_dataset(const SimConfig& cfg, int n, std::uint64_t seed) {
  cfg.validate();
  if (n < 8) {
    throw ConfigError("make_dataset: n must be at least 8, got " + std::to_string(n));
  }
  Dataset d;
  d.range_bins = cfg.range_bins;
  d.azimuth_bins = cfg.azimuth_bins;
  d.image_height = cfg.image_height;
  d.image_width = cfg.image_width;

  std::vector<std::uint8_t> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint8_t>(i % kNumClasses);
  }
  Rng order_rng = make_rng(seed, "labels");
  std::shuffle(labels.begin(), labels.end(), order_rng);

  d.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    d.samples[i] = generate_sample(cfg, static_cast<SceneClass>(labels[i]), seed, static_cast<std::uint32_t>(i));
  }

  std::array<std::vector<std::uint32_t>, kNumClasses> buckets;
  for (int i = 0; i < n; ++i) {
    buckets[labels[i]].push_back(static_cast<std::uint32_t>(i));
  }
  Rng split_rng = make_rng(seed, "split");
  for (auto& b : buckets) {
    std::shuffle(b.begin(), b.end(), split_rng);
  }
  // Bucket sizes differ by at most one, and floor(f*n + 1/2) is monotone in n,
  // so every split stays balanced to within one.
  d.test = take_stratified(buckets, cfg.test_fraction);
  const double vision_of_rest = cfg.vision_fraction / (1.0 - cfg.test_fraction);
  d.vision = take_stratified(buckets, vision_of_rest);
  for (const auto& b : buckets) {
    d.train.insert(d.train.end(), b.begin(), b.end());
  }
  d.train.insert(d.train.end(), d.vision.begin(), d.vision.end());
  std::sort(d.train.begin(), d.train.end());
  return d;
}

MatrixXr radar_batch(const Dataset& d, const std::vector<std::uint32_t>& indices) {
  MatrixXr out(static_cast<Eigen::Index>(indices.size()), d.radar_dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const MatrixXr& h = d.samples[indices[k]].heatmap;
    const double peak = h.maxCoeff();
    const double s = peak > 0.0 ? 1.0 / peak : 0.0;
    out.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(h.data(), h.size()) * s;
  }
  return out;
}

MatrixXr image_batch(const Dataset& d, const std::vector<std::uint32_t>& indices) {
  MatrixXr out(static_cast<Eigen::Index>(indices.size()), d.image_dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const MatrixXr& img = d.samples[indices[k]].image;
    out.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(img.data(), img.size());
  }
  return out;
}

LabelVector label_batch(const Dataset& d, const std::vector<std::uint32_t>& indices) {
  LabelVector out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = d.samples[indices[k]].class_id;
  }
  return out;
}

}  // namespace xmc

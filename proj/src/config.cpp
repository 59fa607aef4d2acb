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

#include "xmc/config.hpp"

#include <cmath>

#include "xmc/error.hpp"
#include "xmc/io.hpp"

namespace xmc {

using nlohmann::json;

namespace {

std::string_view vision_mode_name(VisionMode m) { return m == VisionMode::kTrained ? "trained" : "random-frozen"; }

VisionMode parse_vision_mode(const std::string& s) {
  if (s == "trained") return VisionMode::kTrained;
  if (s == "random-frozen") return VisionMode::kRandomFrozen;
  throw ConfigError("vision.mode: expected \"trained\" or \"random-frozen\", got \"" + s + "\"");
}

// Rejects keys of `given` that do not occur in `schema`, recursing into objects.
void check_keys(const json& given, const json& schema, const std::string& path) {
  if (!given.is_object()) {
    throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
  }
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) {
      throw ConfigError("unknown config key \"" + full + "\"");
    }
    if (schema.at(key).is_object()) {
      check_keys(value, schema.at(key), full);
    }
  }
}

// Reads typed fields and reports type mismatches with their key path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}
  template <typename T>
  void operator()(const char* key, T& out) const {
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }
  Reader section(const char* key) const { return Reader(j_.at(key), path_.empty() ? key : path_ + "." + key); }

 private:
  const json& j_;
  std::string path_;
};

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  const SimConfig& s = c.datagen.sim;
  json j;
  j["seed"] = c.seed;
  j["datagen"] = {{"n", c.datagen.n},
                  {"range_bins", s.range_bins},
                  {"azimuth_bins", s.azimuth_bins},
                  {"image_height", s.image_height},
                  {"image_width", s.image_width},
                  {"range_min_m", s.range_min_m},
                  {"range_max_m", s.range_max_m},
                  {"azimuth_max_rad", s.azimuth_max_rad},
                  {"radar_spread_per_m", s.radar_spread_per_m},
                  {"radar_noise", s.radar_noise},
                  {"image_noise", s.image_noise},
                  {"image_size_gain", s.image_size_gain},
                  {"camera_height_m", s.camera_height_m},
                  {"vision_fraction", s.vision_fraction},
                  {"test_fraction", s.test_fraction}};
  j["vision"] = {{"mode", vision_mode_name(c.vision.mode)},
                 {"hidden", c.vision.hidden},
                 {"embed_dim", c.vision.embed_dim},
                 {"epochs", c.vision.epochs},
                 {"batch_size", c.vision.batch_size},
                 {"lr", c.vision.lr},
                 {"momentum", c.vision.momentum},
                 {"weight_decay", c.vision.weight_decay}};
  j["contrastive"] = {{"tau", c.contrastive.tau},
                      {"queue_size", c.contrastive.queue_size},
                      {"batch_size", c.contrastive.batch_size},
                      {"epochs", c.contrastive.epochs},
                      {"lr", c.contrastive.base_lr},
                      {"momentum", c.contrastive.momentum},
                      {"weight_decay", c.contrastive.weight_decay},
                      {"hidden", c.contrastive.hidden},
                      {"embed_dim", c.contrastive.embed_dim}};
  const ProbeConfig& p = c.eval.probe;
  j["eval"] = {{"epochs", p.epochs},
               {"baseline_epochs", p.baseline_epochs},
               {"batch_size", p.batch_size},
               {"lr", p.lr},
               {"momentum", p.momentum},
               {"weight_decay", p.weight_decay},
               {"baseline_hidden", p.hidden},
               {"baseline_embed_dim", p.embed_dim},
               {"fraction", c.eval.fraction},
               {"label_fractions", c.eval.label_fractions},
               {"queue_sizes", c.eval.queue_sizes},
               {"seeds", c.eval.seeds}};
  const CriticConfig& m = c.mi.critic;
  j["mi"] = {{"steps", c.mi.steps},
             {"quadratic_lift", m.quadratic_lift},
             {"tau", m.tau},
             {"batch_size", m.batch_size},
             {"lr", m.lr},
             {"momentum", m.momentum},
             {"weight_decay", m.weight_decay},
             {"eval_pairs", m.eval_pairs},
             {"rhos", c.mi.rhos},
             {"dims", c.mi.dims},
             {"queue_sizes", c.mi.queue_sizes},
             {"seeds", c.mi.seeds}};
  j["io"] = {{"dataset", c.io.dataset}, {"splits", c.io.splits}, {"vision", c.io.vision}, {"radio", c.io.radio}};
  return j;
}

ExperimentConfig config_from_json(const json& given) {
  const json defaults = config_to_json(ExperimentConfig{});
  check_keys(given, defaults, "");
  json merged = defaults;
  merged.merge_patch(given);

  ExperimentConfig c;
  const Reader root(merged, "");
  root("seed", c.seed);

  const Reader dg = root.section("datagen");
  SimConfig& s = c.datagen.sim;
  dg("n", c.datagen.n);
  dg("range_bins", s.range_bins);
  dg("azimuth_bins", s.azimuth_bins);
  dg("image_height", s.image_height);
  dg("image_width", s.image_width);
  dg("range_min_m", s.range_min_m);
  dg("range_max_m", s.range_max_m);
  dg("azimuth_max_rad", s.azimuth_max_rad);
  dg("radar_spread_per_m", s.radar_spread_per_m);
  dg("radar_noise", s.radar_noise);
  dg("image_noise", s.image_noise);
  dg("image_size_gain", s.image_size_gain);
  dg("camera_height_m", s.camera_height_m);
  dg("vision_fraction", s.vision_fraction);
  dg("test_fraction", s.test_fraction);

  const Reader v = root.section("vision");
  std::string mode;
  v("mode", mode);
  c.vision.mode = parse_vision_mode(mode);
  v("hidden", c.vision.hidden);
  v("embed_dim", c.vision.embed_dim);
  v("epochs", c.vision.epochs);
  v("batch_size", c.vision.batch_size);
  v("lr", c.vision.lr);
  v("momentum", c.vision.momentum);
  v("weight_decay", c.vision.weight_decay);

  const Reader ct = root.section("contrastive");
  ct("tau", c.contrastive.tau);
  ct("queue_size", c.contrastive.queue_size);
  ct("batch_size", c.contrastive.batch_size);
  ct("epochs", c.contrastive.epochs);
  ct("lr", c.contrastive.base_lr);
  ct("momentum", c.contrastive.momentum);
  ct("weight_decay", c.contrastive.weight_decay);
  ct("hidden", c.contrastive.hidden);
  ct("embed_dim", c.contrastive.embed_dim);

  const Reader ev = root.section("eval");
  ProbeConfig& p = c.eval.probe;
  ev("epochs", p.epochs);
  ev("baseline_epochs", p.baseline_epochs);
  ev("batch_size", p.batch_size);
  ev("lr", p.lr);
  ev("momentum", p.momentum);
  ev("weight_decay", p.weight_decay);
  ev("baseline_hidden", p.hidden);
  ev("baseline_embed_dim", p.embed_dim);
  ev("fraction", c.eval.fraction);
  ev("label_fractions", c.eval.label_fractions);
  ev("queue_sizes", c.eval.queue_sizes);
  ev("seeds", c.eval.seeds);

  const Reader mi = root.section("mi");
  CriticConfig& m = c.mi.critic;
  mi("steps", c.mi.steps);
  mi("quadratic_lift", m.quadratic_lift);
  mi("tau", m.tau);
  mi("batch_size", m.batch_size);
  mi("lr", m.lr);
  mi("momentum", m.momentum);
  mi("weight_decay", m.weight_decay);
  mi("eval_pairs", m.eval_pairs);
  mi("rhos", c.mi.rhos);
  mi("dims", c.mi.dims);
  mi("queue_sizes", c.mi.queue_sizes);
  mi("seeds", c.mi.seeds);

  const Reader io = root.section("io");
  io("dataset", c.io.dataset);
  io("splits", c.io.splits);
  io("vision", c.io.vision);
  io("radio", c.io.radio);

  c.validate();
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& p) {
  const auto bytes = read_file(p);
  return parse_config(std::string_view(bytes.data(), bytes.size()));
}

void apply_override(ExperimentConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override \"" + std::string(assignment) + "\" is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json patch = json::object();
  json* node = &patch;
  std::size_t start = 0;
  for (std::size_t dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
    node = &(*node)[key.substr(start, dot - start)];
    start = dot + 1;
  }
  (*node)[key.substr(start)] = value;
  json merged = config_to_json(c);
  check_keys(patch, merged, "");
  merged.merge_patch(patch);
  c = config_from_json(merged);
}

void ExperimentConfig::validate() const {
  datagen.sim.validate();
  if (datagen.n < 1) {
    throw ConfigError("datagen.n must be positive");
  }
  if (vision.epochs < 0 || vision.batch_size < 1 || vision.embed_dim < 1) {
    throw ConfigError("vision: epochs must be non-negative, batch_size and embed_dim positive");
  }
  contrastive.validate();
  if (vision.embed_dim != contrastive.embed_dim) {
    throw ConfigError("vision.embed_dim and contrastive.embed_dim must agree");
  }
  eval.probe.validate();
  auto bad_fraction = [](double f) { return !(f > 0.0) || f > 1.0; };
  if (bad_fraction(eval.fraction)) {
    throw ConfigError("eval.fraction must be in (0, 1]");
  }
  for (double f : eval.label_fractions) {
    if (bad_fraction(f)) throw ConfigError("eval.label_fractions entries must be in (0, 1]");
  }
  if (eval.seeds.size() < 3) {
    throw ConfigError("eval.seeds needs at least 3 seeds");
  }
  if (eval.queue_sizes.empty() || eval.label_fractions.empty()) {
    throw ConfigError("eval.queue_sizes and eval.label_fractions must be non-empty");
  }
  for (int k : eval.queue_sizes) {
    if (k < 1) throw ConfigError("eval.queue_sizes entries must be positive");
  }
  mi.critic.validate();
  if (mi.steps < 0) {
    throw ConfigError("mi.steps must be non-negative");
  }
  for (double r : mi.rhos) {
    if (!(std::abs(r) < 1.0)) throw ConfigError("mi.rhos entries must satisfy |rho| < 1");
  }
  for (int d : mi.dims) {
    if (d < 1) throw ConfigError("mi.dims entries must be positive");
  }
  for (int k : mi.queue_sizes) {
    if (k < mi.critic.batch_size || k >= mi.critic.eval_pairs) {
      throw ConfigError("mi.queue_sizes entries must lie in [batch_size, eval_pairs)");
    }
  }
  if (mi.seeds.empty() || mi.rhos.empty() || mi.dims.empty() || mi.queue_sizes.empty()) {
    throw ConfigError("mi: rhos, dims, queue_sizes and seeds must be non-empty");
  }
}

}  // namespace xmc

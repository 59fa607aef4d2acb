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

#include "doctest.h"
#include "xmc/config.hpp"
#include "xmc/error.hpp"

using namespace xmc;

TEST_CASE("defaults round trip") {
  const ExperimentConfig d;
  CHECK_NOTHROW(d.validate());
  const ExperimentConfig back = config_from_json(config_to_json(d));
  CHECK(config_to_json(back) == config_to_json(d));
  CHECK(parse_config("{}").contrastive.queue_size == 256);
  CHECK(d.contrastive.base_lr == 0.03);
  CHECK(d.contrastive.momentum == 0.9);
  CHECK(d.contrastive.weight_decay == 1e-4);
}

TEST_CASE("partial configs keep defaults") {
  const ExperimentConfig c = parse_config(R"({"seed": 9, "contrastive": {"queue_size": 128}})");
  CHECK(c.seed == 9);
  CHECK(c.contrastive.queue_size == 128);
  CHECK(c.contrastive.batch_size == 64);
  CHECK(c.datagen.n == 2000);
}

TEST_CASE("invalid configs") {
  CHECK_THROWS_AS(parse_config(R"({"contrastive": {"queu_size": 128}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"contrastive": {"tau": "hot"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"contrastive": {"queue_size": 8}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"vision": {"mode": "imagenet"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"eval": {"seeds": [1, 2]}})"), ConfigError);
  try {
    parse_config(R"({"mi": {"stepz": 1}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mi.stepz") != std::string::npos);
  }
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  apply_override(c, "contrastive.epochs=5");
  apply_override(c, "vision.mode=random-frozen");
  apply_override(c, "eval.queue_sizes=[64,128]");
  CHECK(c.contrastive.epochs == 5);
  CHECK(c.vision.mode == VisionMode::kRandomFrozen);
  CHECK(c.eval.queue_sizes == std::vector<int>{64, 128});
  CHECK_THROWS_AS(apply_override(c, "contrastive.nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "no-equals"), ConfigError);
}

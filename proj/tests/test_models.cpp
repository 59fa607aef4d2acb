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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "xmc/error.hpp"
#include "xmc/models.hpp"

using namespace xmc;
using xmc::test::max_fd_error;
using xmc::test::random_matrix;

TEST_CASE("encoder forward") {
  const EncoderModel m({6, 5, 3}, 1);
  CHECK(m.input_dim() == 6);
  CHECK(m.embed_dim() == 3);
  CHECK(m.dims() == std::vector<int>{6, 5, 3});
  const MatrixXr x = random_matrix(4, 6, 2);
  CHECK(m.forward(ad::Tensor::constant(x)).value() == m.embed(x));
  CHECK_THROWS_AS(m.embed(random_matrix(4, 7, 2)), DimensionError);

  // Glorot bound and zero bias.
  const double bound = std::sqrt(6.0 / (6 + 5));
  CHECK(m.layers()[0].weight.value().cwiseAbs().maxCoeff() <= bound);
  CHECK(m.layers()[0].bias.value().isZero());

  EncoderModel zero = m.clone();
  for (auto p : zero.parameters()) p.mutable_value().setZero();
  CHECK(zero.embed(x).isZero());
}

TEST_CASE("encoder gradients match finite differences") {
  EncoderModel m({5, 7, 3}, 3);
  const MatrixXr x = random_matrix(4, 5, 4);
  const MatrixXr w = random_matrix(4, 3, 5);
  auto loss = [&] { return ad::sum(ad::mul(m.forward(ad::Tensor::constant(x)), ad::Tensor::constant(w))); };
  m.zero_grad();
  ad::backward(loss());
  CHECK(max_fd_error(m.parameters(), [&] { return loss().item(); }) < 1e-4);
}

TEST_CASE("freeze contract") {
  EncoderModel m({4, 3}, 5);
  m.freeze();
  CHECK(m.frozen());
  for (const auto& p : m.parameters()) CHECK_FALSE(p.requires_grad());
  const auto before = m.parameter_bytes();
  const ad::Tensor out = m.forward(ad::Tensor::constant(random_matrix(2, 4, 6)));
  CHECK_FALSE(out.requires_grad());
  auto params = m.parameters();
  OptimizerState st = make_optimizer_state(params, 0.1, 0.9, 1e-4);
  sgd_step(params, st);
  CHECK(m.parameter_bytes() == before);
  for (const auto& p : m.parameters()) CHECK_FALSE(p.has_grad());

  EncoderModel copy = m.clone();
  CHECK_FALSE(copy.frozen());
  CHECK(copy.parameter_bytes() == before);
}

TEST_CASE("sgd_step") {
  auto scalar_param = [](double v) { return ad::Tensor::parameter(MatrixXr::Constant(1, 1, v)); };
  SUBCASE("plain gradient descent") {
    std::vector<ad::Tensor> p{scalar_param(2.0)};
    ad::backward(ad::sum(ad::mul(p[0], p[0])));  // g = 4
    OptimizerState st = make_optimizer_state(p, 0.1, 0.0, 0.0);
    sgd_step(p, st);
    CHECK(p[0].value()(0, 0) == doctest::Approx(2.0 - 0.1 * 4.0));
    CHECK(st.step_count == 1);
  }
  SUBCASE("two hand-computed momentum steps") {
    std::vector<ad::Tensor> p{scalar_param(1.0)};
    OptimizerState st = make_optimizer_state(p, 0.1, 0.9, 0.01);
    // loss = 3p, g = 3 each step.
    double v = 0.0;
    double x = 1.0;
    for (int step = 0; step < 2; ++step) {
      p[0].zero_grad();
      ad::backward(ad::sum(ad::scale(p[0], 3.0)));
      sgd_step(p, st);
      v = 0.9 * v + (3.0 + 0.01 * x);
      x -= 0.1 * v;
      CHECK(p[0].value()(0, 0) == doctest::Approx(x).epsilon(1e-15));
    }
  }
  SUBCASE("weight decay shrinkage and zero lr") {
    std::vector<ad::Tensor> p{scalar_param(5.0)};
    p[0].zero_grad();
    ad::backward(ad::scale(ad::sum(p[0]), 0.0));
    OptimizerState st = make_optimizer_state(p, 0.1, 0.0, 0.01);
    sgd_step(p, st);
    CHECK(p[0].value()(0, 0) == doctest::Approx(5.0 * (1 - 0.1 * 0.01)).epsilon(1e-15));
    st.lr = 0.0;
    const double keep = p[0].value()(0, 0);
    sgd_step(p, st);
    CHECK(p[0].value()(0, 0) == keep);
  }
  SUBCASE("missing gradient") {
    std::vector<ad::Tensor> p{scalar_param(1.0)};
    OptimizerState st = make_optimizer_state(p, 0.1, 0.0, 0.0);
    CHECK_THROWS_AS(sgd_step(p, st), UsageError);
  }
}

TEST_CASE("cosine_lr") {
  CHECK(cosine_lr(0, 100, 0.03) == doctest::Approx(0.03));
  CHECK(cosine_lr(100, 100, 0.03) == doctest::Approx(0.0));
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.015));
  double last = 1.0;
  for (long t = 0; t <= 37; ++t) {
    const double v = cosine_lr(t, 37, 1.0);
    CHECK(v <= last);
    last = v;
  }
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.03), DomainError);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.03), DomainError);
}

TEST_CASE("classifier head") {
  const ClassifierHead head(8, kNumClasses, 1);
  CHECK(head.num_classes() == 4);
  CHECK(head.linear_only());
  CHECK(head.forward(ad::Tensor::constant(random_matrix(3, 8, 7))).cols() == 4);
}

TEST_CASE("supervised training separates simple clusters") {
  MatrixXr x(200, 4);
  LabelVector y(200);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    y(i) = static_cast<std::uint8_t>(i % 4);
    for (int j = 0; j < 4; ++j) x(i, j) = (j == y(i) ? 3.0 : 0.0) + 0.3 * standard_normal(rng);
  }
  const LabeledSet set{x, y};
  EncoderModel enc({4, 8, 4}, 2);
  ClassifierHead head(4, 4, 2);
  SupervisedOptions opts;
  opts.epochs = 20;
  opts.lr = 0.05;
  opts.train_encoder = true;
  const auto before = enc.parameter_bytes();
  const auto hist = train_supervised(&enc, head, set, &set, opts);
  CHECK(hist.size() == 20);
  CHECK(hist.back().test_accuracy > 0.95);
  CHECK(hist.back().test_loss < hist.front().test_loss);
  CHECK(enc.parameter_bytes() != before);
  CHECK(evaluate_classifier(&enc, head, set).accuracy == doctest::Approx(hist.back().test_accuracy));
}

TEST_CASE("vision teacher") {
  const Dataset d = make_dataset(SimConfig{}, 200, 4);
  VisionConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = {16};
  cfg.embed_dim = 8;
  const VisionResult r = pretrain_vision(d, cfg);
  CHECK(r.encoder.frozen());
  CHECK(r.history.size() == 2);

  cfg.mode = VisionMode::kRandomFrozen;
  const VisionResult rnd = pretrain_vision(d, cfg);
  CHECK(rnd.encoder.frozen());
  CHECK(rnd.history.empty());

  Dataset overlap = d;
  overlap.vision.push_back(overlap.test.front());
  cfg.mode = VisionMode::kTrained;
  CHECK_THROWS_AS(pretrain_vision(overlap, cfg), ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  EncoderModel m({6, 4, 3}, 9);
  auto params = m.parameters();
  m.zero_grad();
  ad::backward(ad::sum(m.forward(ad::Tensor::constant(random_matrix(5, 6, 1)))));
  OptimizerState st = make_optimizer_state(params, 0.03, 0.9, 1e-4);
  sgd_step(params, st);

  const auto bytes = encode_checkpoint(m, &st);
  CHECK(std::string(bytes.data(), 4) == "XMCK");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.model.parameter_bytes() == m.parameter_bytes());
  CHECK(back.model.dims() == m.dims());
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step_count == st.step_count);
  CHECK(back.optimizer->velocity.size() == st.velocity.size());
  CHECK(back.optimizer->velocity[0] == st.velocity[0]);
  CHECK(encode_checkpoint(back.model, &*back.optimizer) == bytes);

  m.freeze();
  CHECK(decode_checkpoint(encode_checkpoint(m)).model.frozen());
  CHECK_FALSE(decode_checkpoint(encode_checkpoint(m)).optimizer.has_value());
  auto cut = bytes;
  cut.resize(10);
  CHECK_THROWS_AS(decode_checkpoint(cut), FormatError);
}

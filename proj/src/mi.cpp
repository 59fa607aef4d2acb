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

#include "xmc/mi.hpp"

#include <cmath>
#include <sstream>

#include "xmc/contrastive.hpp"
#include "xmc/error.hpp"
#include "xmc/numeric.hpp"

namespace xmc {

double mi_lower_bound(double mean_loss, int k) {
  if (k < 1) {
    throw DomainError("mi_lower_bound: k must be >= 1, got " + std::to_string(k));
  }
  return std::log(static_cast<double>(k)) - mean_loss;
}

void CriticConfig::validate() const {
  if (batch_size < 1 || eval_pairs < 2) {
    throw ConfigError("critic: batch_size must be positive and eval_pairs at least 2");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("critic: tau must be positive");
  }
  if (lr < 0.0 || momentum < 0.0 || weight_decay < 0.0) {
    throw ConfigError("critic: lr, momentum and weight decay must be non-negative");
  }
}

MatrixXr lift_inputs(const MatrixXr& u, bool quadratic) {
  if (!quadratic) {
    return u;
  }
  MatrixXr out(u.rows(), 2 * u.cols());
  out << u, u.array().square().matrix();
  return out;
}

double heldout_loss(const MiCritic& critic, const GaussianPairs& pairs, int k) {
  const Eigen::Index n = pairs.x.rows();
  if (k < 1 || k >= n) {
    throw UsageError("heldout_loss: need 1 <= K < held-out pairs, got K=" + std::to_string(k) + " with " +
                     std::to_string(n) + " pairs");
  }
  const MatrixXr fx = critic.f.embed(lift_inputs(pairs.x, critic.quadratic_lift));
  const MatrixXr gy = lift_inputs(pairs.y, critic.quadratic_lift);
  VectorXr pos = (fx.array() * gy.array()).rowwise().sum();
  MatrixXr neg(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      neg(i, j) = fx.row(i).dot(gy.row((i + 1 + j) % n));
    }
  }
  return info_nce_from_scores(pos, neg, critic.tau);
}

MiEstimate estimate_mi_gaussian(const GaussianPairConfig& cfg, const CriticConfig& critic, int k, int steps,
                                MiCritic* trained) {
  critic.validate();
  if (k < critic.batch_size) {
    throw ConfigError("estimate_mi_gaussian: K=" + std::to_string(k) + " must be >= batch size " +
                      std::to_string(critic.batch_size));
  }
  if (steps < 0) {
    throw ConfigError("estimate_mi_gaussian: steps must be non-negative");
  }
  const int in = critic.quadratic_lift ? 2 * cfg.dim : cfg.dim;
  MiCritic c{EncoderModel({in, in}, derive_seed(cfg.seed, "critic-init")), critic.quadratic_lift, critic.tau};

  auto batch = [&](std::string_view label, std::uint64_t index, int count) {
    GaussianPairConfig b = cfg;
    b.count = count;
    b.seed = derive_seed(cfg.seed, label, index);
    return gen_gaussian_pairs(b);
  };

  NegativeQueue queue(k, in, NormCheck::kNone);
  queue.enqueue(lift_inputs(batch("critic-warm", 0, k).y, c.quadratic_lift));

  std::vector<ad::Tensor> params = c.f.parameters();
  OptimizerState opt = make_optimizer_state(params, critic.lr, critic.momentum, critic.weight_decay);
  for (int s = 0; s < steps; ++s) {
    const GaussianPairs p = batch("critic-train", static_cast<std::uint64_t>(s), critic.batch_size);
    const MatrixXr keys = lift_inputs(p.y, c.quadratic_lift);
    ad::Tensor loss;
    try {
      const ad::Tensor q = c.f.forward(ad::Tensor::constant(lift_inputs(p.x, c.quadratic_lift)));
      loss = info_nce(q, keys, queue, c.tau, NormCheck::kNone);
    } catch (const DomainError& e) {
      throw NumericError(std::string("estimate_mi_gaussian: ") + e.what(), 0, s);
    }
    c.f.zero_grad();
    ad::backward(loss);
    sgd_step(params, opt);
    queue.enqueue(keys);
  }

  MiEstimate est;
  est.k_negatives = k;
  est.mean_loss = heldout_loss(c, batch("critic-eval", 0, critic.eval_pairs), k);
  est.mi_lower_bound = mi_lower_bound(est.mean_loss, k);
  est.true_mi = analytic_mi(cfg.rho, cfg.dim);
  est.rho = cfg.rho;
  est.dim = cfg.dim;
  est.seed = cfg.seed;
  if (trained != nullptr) {
    *trained = std::move(c);
  }
  return est;
}

std::string mi_csv(const std::vector<MiEstimate>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "rho,dim,K,seed,mean_loss,mi_lower_bound,true_mi\n";
  for (const auto& r : rows) {
    os << r.rho << ',' << r.dim << ',' << r.k_negatives << ',' << r.seed << ',' << r.mean_loss << ','
       << r.mi_lower_bound << ',';
    if (r.true_mi) {
      os << *r.true_mi;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace xmc

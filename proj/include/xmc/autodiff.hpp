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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xmc/types.hpp"

namespace xmc::ad {

// Reverse-mode differentiation over dense f64 tensors of rank 0, 1 or 2.
//
// Storage is always a row-major matrix: a scalar is 1x1 and a rank-1 tensor of
// length n is n x 1. Graphs are recorded as ops execute; every node carries a
// creation id that increases monotonically, so sorting reachable nodes by id
// yields a topological order without a global tape.

struct Node {
  MatrixXr value;
  MatrixXr grad;
  bool has_grad = false;
  bool requires_grad = false;
  int rank = 2;
  std::uint64_t id = 0;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into its inputs.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty(); }
};

class Tensor {
 public:
  Tensor() = default;

  /// Rank-2 tensor with no gradient tracking.
  static Tensor constant(MatrixXr value);
  /// Rank-1 tensor with no gradient tracking.
  static Tensor vector(const VectorXr& value);
  static Tensor scalar(double value);
  /// Trainable leaf of rank 2.
  static Tensor parameter(MatrixXr value);
  /// Trainable leaf of rank 1.
  static Tensor parameter_vector(const VectorXr& value);

  bool defined() const { return node_ != nullptr; }
  const MatrixXr& value() const { return node_->value; }
  /// Direct access for optimizers and checkpoint loading. Only valid on leaves.
  MatrixXr& mutable_value();

  /// Shape as a list of extents; empty for scalars.
  std::vector<Eigen::Index> shape() const;
  std::string shape_string() const;
  int rank() const { return node_->rank; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index numel() const { return node_->value.size(); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->has_grad; }
  /// Gradient buffer; zero-filled when nothing has been accumulated yet.
  MatrixXr grad() const;
  void zero_grad();

  /// Same value, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Nodes reachable from a root, inputs before consumers.
class Graph {
 public:
  explicit Graph(const Tensor& root);
  const std::vector<Node*>& nodes() const { return nodes_; }

 private:
  std::vector<Node*> nodes_;
};

/// Populates grad on every reachable tensor that requires it. Leaf gradients
/// accumulate across calls; callers zero them between steps.
void backward(const Tensor& loss);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// relu'(0) is 0.
Tensor relu(const Tensor& a);
/// x[B x N] + b[N] added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor l2_normalize(const Tensor& v);
/// Row-wise log-sum-exp; B x C -> [B].
Tensor logsumexp_row(const Tensor& s);
/// Row sums; B x C -> [B].
Tensor row_sum(const Tensor& a);
/// [a | b] along columns; a rank-1 operand acts as a single column.
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// out[b] = s(b, index[b]).
Tensor gather_cols(const Tensor& s, std::span<const int> index);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Mean softmax cross-entropy of logits[B x C] against integer targets.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

}  // namespace xmc::ad

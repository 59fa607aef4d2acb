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

#include "xmc/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "xmc/error.hpp"
#include "xmc/numeric.hpp"

namespace xmc::ad {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

std::shared_ptr<Node> make_leaf(MatrixXr value, int rank, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->rank = rank;
  n->requires_grad = requires_grad;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->op = "leaf";
  return n;
}

// Builds an op node. Inputs are retained only when some input needs a gradient,
// so inference-only computations leave no graph behind.
Tensor make_op(std::string op, MatrixXr value, int rank, std::vector<std::shared_ptr<Node>> inputs,
               std::function<void(Node&)> backward_fn) {
  if (!value.allFinite()) {
    // Finite inputs always give finite outputs for the ops below; flag anything else early.
    for (const auto& in : inputs) {
      if (!in->value.allFinite()) {
        throw DomainError(op + ": non-finite input");
      }
    }
    throw DomainError(op + ": produced a non-finite value");
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->rank = rank;
  n->op = std::move(op);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const auto& in) { return in->requires_grad; });
  if (any) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

template <typename Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) {
    return;
  }
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

std::string shape_of(const Tensor& t) { return t.shape_string(); }

[[noreturn]] void dim_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw DimensionError(op + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rank() != b.rank()) {
    dim_error(op, a, b);
  }
}

void require_rank2(const std::string& op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(op + ": expected a matrix, got " + shape_of(a));
  }
}

}  // namespace

Tensor Tensor::constant(MatrixXr value) { return Tensor(make_leaf(std::move(value), 2, false)); }

Tensor Tensor::vector(const VectorXr& value) { return Tensor(make_leaf(MatrixXr(value), 1, false)); }

Tensor Tensor::scalar(double value) {
  MatrixXr m(1, 1);
  m(0, 0) = value;
  return Tensor(make_leaf(std::move(m), 0, false));
}

Tensor Tensor::parameter(MatrixXr value) { return Tensor(make_leaf(std::move(value), 2, true)); }

Tensor Tensor::parameter_vector(const VectorXr& value) {
  return Tensor(make_leaf(MatrixXr(value), 1, true));
}

MatrixXr& Tensor::mutable_value() {
  if (!node_->is_leaf()) {
    throw UsageError("mutable_value: only leaf tensors may be modified in place");
  }
  return node_->value;
}

std::vector<Eigen::Index> Tensor::shape() const {
  switch (node_->rank) {
    case 0:
      return {};
    case 1:
      return {node_->value.rows()};
    default:
      return {node_->value.rows(), node_->value.cols()};
  }
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  const auto s = shape();
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << (i ? "x" : "") << s[i];
  }
  os << ']';
  return os.str();
}

double Tensor::item() const {
  if (numel() != 1) {
    throw UsageError("item: tensor " + shape_string() + " is not a scalar");
  }
  return node_->value(0, 0);
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf()) {
    throw UsageError("set_requires_grad: only leaf tensors can change trainability");
  }
  node_->requires_grad = on;
  if (!on) {
    node_->grad.resize(0, 0);
    node_->has_grad = false;
  }
}

MatrixXr Tensor::grad() const {
  if (!node_->has_grad) {
    return MatrixXr::Zero(rows(), cols());
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->has_grad = false;
  node_->grad.resize(0, 0);
}

Tensor Tensor::detach() const { return Tensor(make_leaf(node_->value, node_->rank, false)); }

Graph::Graph(const Tensor& root) {
  std::unordered_set<const Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) {
      continue;
    }
    nodes_.push_back(n);
    for (const auto& in : n->inputs) {
      stack.push_back(in.get());
    }
  }
  std::sort(nodes_.begin(), nodes_.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rank() != 0 || loss.numel() != 1) {
    throw UsageError("backward: loss must be a scalar, got " +
                     (loss.defined() ? loss.shape_string() : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    return;
  }
  Graph graph(loss);
  for (Node* n : graph.nodes()) {
    if (!n->is_leaf()) {
      n->has_grad = false;
    }
  }
  Node& root = *loss.node();
  accumulate(root, MatrixXr::Ones(1, 1));
  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad) {
      n->backward_fn(*n);
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.cols() != b.rows()) {
    dim_error("matmul", a, b);
  }
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op("matmul", a.value() * b.value(), 2, {a.node(), b.node()}, [an, bn](Node& self) {
    if (an->requires_grad) accumulate(*an, self.grad * bn->value.transpose());
    if (bn->requires_grad) accumulate(*bn, an->value.transpose() * self.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op("add", a.value() + b.value(), a.rank(), {a.node(), b.node()}, [an, bn](Node& self) {
    accumulate(*an, self.grad);
    accumulate(*bn, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  return make_op("sub", a.value() - b.value(), a.rank(), {a.node(), b.node()}, [an, bn](Node& self) {
    accumulate(*an, self.grad);
    accumulate(*bn, -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Node* an = a.node().get();
  Node* bn = b.node().get();
  MatrixXr out = a.value().cwiseProduct(b.value());
  return make_op("mul", std::move(out), a.rank(), {a.node(), b.node()}, [an, bn](Node& self) {
    if (an->requires_grad) accumulate(*an, self.grad.cwiseProduct(bn->value));
    if (bn->requires_grad) accumulate(*bn, self.grad.cwiseProduct(an->value));
  });
}

Tensor scale(const Tensor& a, double factor) {
  Node* an = a.node().get();
  return make_op("scale", a.value() * factor, a.rank(), {a.node()},
                 [an, factor](Node& self) { accumulate(*an, self.grad * factor); });
}

Tensor relu(const Tensor& a) {
  Node* an = a.node().get();
  return make_op("relu", a.value().cwiseMax(0.0), a.rank(), {a.node()}, [an](Node& self) {
    accumulate(*an, (an->value.array() > 0.0).select(self.grad, 0.0).matrix());
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2("add_bias", x);
  if (bias.rank() != 1 || bias.rows() != x.cols()) {
    dim_error("add_bias", x, bias);
  }
  Node* xn = x.node().get();
  Node* bn = bias.node().get();
  MatrixXr out = x.value();
  out.rowwise() += bias.value().col(0).transpose();
  return make_op("add_bias", std::move(out), 2, {x.node(), bias.node()}, [xn, bn](Node& self) {
    accumulate(*xn, self.grad);
    if (bn->requires_grad) accumulate(*bn, self.grad.colwise().sum().transpose());
  });
}

Tensor l2_normalize(const Tensor& v) {
  require_rank2("l2_normalize", v);
  const VectorXr norms = v.value().rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (!(norms(r) > kNormEpsilon)) {
      throw DegenerateInputError("l2_normalize: row " + std::to_string(r) + " has norm " +
                                 std::to_string(norms(r)));
    }
  }
  MatrixXr y = norms.cwiseInverse().asDiagonal() * v.value();
  Node* vn = v.node().get();
  return make_op("l2_normalize", y, 2, {v.node()}, [vn, norms](Node& self) {
    // d(v/|v|) applied to g is (g - y (y . g)) / |v|.
    const MatrixXr& y = self.value;
    const VectorXr dots = y.cwiseProduct(self.grad).rowwise().sum();
    MatrixXr g = self.grad - dots.asDiagonal() * y;
    accumulate(*vn, norms.cwiseInverse().asDiagonal() * g);
  });
}

Tensor logsumexp_row(const Tensor& s) {
  require_rank2("logsumexp_row", s);
  Node* sn = s.node().get();
  return make_op("logsumexp_row", MatrixXr(logsumexp_rows(s.value())), 1, {s.node()},
                 [sn](Node& self) {
                   const MatrixXr p = softmax_rows(sn->value);
                   accumulate(*sn, self.grad.col(0).asDiagonal() * p);
                 });
}

Tensor row_sum(const Tensor& a) {
  require_rank2("row_sum", a);
  Node* an = a.node().get();
  const Eigen::Index cols = a.cols();
  return make_op("row_sum", MatrixXr(a.value().rowwise().sum()), 1, {a.node()},
                 [an, cols](Node& self) { accumulate(*an, self.grad.col(0).replicate(1, cols)); });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || b.rank() == 0) {
    dim_error("concat_cols", a, b);
  }
  if (a.rows() != b.rows()) {
    dim_error("concat_cols", a, b);
  }
  MatrixXr out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  Node* an = a.node().get();
  Node* bn = b.node().get();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return make_op("concat_cols", std::move(out), 2, {a.node(), b.node()}, [an, bn, ca, cb](Node& self) {
    if (an->requires_grad) accumulate(*an, self.grad.leftCols(ca));
    if (bn->requires_grad) accumulate(*bn, self.grad.rightCols(cb));
  });
}

Tensor gather_cols(const Tensor& s, std::span<const int> index) {
  require_rank2("gather_cols", s);
  if (static_cast<Eigen::Index>(index.size()) != s.rows()) {
    throw DimensionError("gather_cols: " + std::to_string(index.size()) + " indices for " +
                         s.shape_string());
  }
  MatrixXr out(s.rows(), 1);
  std::vector<int> idx(index.begin(), index.end());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    if (idx[r] < 0 || idx[r] >= s.cols()) {
      throw DimensionError("gather_cols: index " + std::to_string(idx[r]) + " out of range for " +
                           s.shape_string());
    }
    out(r, 0) = s.value()(r, idx[r]);
  }
  Node* sn = s.node().get();
  return make_op("gather_cols", std::move(out), 1, {s.node()}, [sn, idx](Node& self) {
    MatrixXr g = MatrixXr::Zero(sn->value.rows(), sn->value.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      g(r, idx[r]) = self.grad(r, 0);
    }
    accumulate(*sn, g);
  });
}

Tensor sum(const Tensor& a) {
  Node* an = a.node().get();
  MatrixXr out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op("sum", std::move(out), 0, {a.node()}, [an](Node& self) {
    accumulate(*an, MatrixXr::Constant(an->value.rows(), an->value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  if (n == 0) {
    throw DimensionError("mean: empty tensor");
  }
  return scale(sum(a), 1.0 / n);
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  return mean(sub(logsumexp_row(logits), gather_cols(logits, targets)));
}

}  // namespace xmc::ad

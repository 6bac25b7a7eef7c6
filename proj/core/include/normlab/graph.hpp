// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "normlab/tensor.hpp"

namespace normlab {

// Define-by-run reverse-mode tape. Every op eagerly computes its value and
// records a closure that routes upstream gradients to its parents. Gradients
// on leaves accumulate across backward() calls until zero_grads(); gradients
// on interior nodes are reset by each backward() pass.

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
public:
  Tensor value;
  Tensor grad;  // lazily materialized to value's shape
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const noexcept { return parents.empty(); }
  // Returns the gradient buffer, materializing zeros on first touch.
  Tensor& grad_buffer();
};

NodePtr constant(Tensor value);                      // requires_grad = false
NodePtr leaf(Tensor value, bool requires_grad = true);

// Named trainable leaf. The optimizer and gradient checker address
// parameters by name.
struct Parameter {
  std::string name;
  NodePtr node;
  bool trainable = true;

  Tensor& value() { return node->value; }
  const Tensor& value() const { return node->value; }
};

class ParameterSet {
public:
  Parameter& add(const std::string& name, Tensor init, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  std::vector<Parameter>& items() noexcept { return items_; }
  const std::vector<Parameter>& items() const noexcept { return items_; }
  std::size_t total_size() const;
  void zero_grads();

private:
  std::vector<Parameter> items_;
};

void zero_grads(std::vector<Parameter>& params);

// Reverse-mode sweep from a scalar root. Repeated calls accumulate into leaf
// gradients; interior gradients are recomputed from scratch each call.
void backward(const NodePtr& root);

// --- elementwise ---
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr divide(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double alpha);
NodePtr add_const(const NodePtr& a, double c);
NodePtr neg(const NodePtr& a);
NodePtr sqrt_elem(const NodePtr& a);  // precondition: values >= 0
NodePtr nonlinearity(const NodePtr& a, Nonlinearity f);
NodePtr sigmoid(const NodePtr& a);
NodePtr tanh_elem(const NodePtr& a);
NodePtr relu(const NodePtr& a);

// --- reductions and broadcasts (axis convention as in tensor.hpp) ---
NodePtr reduce_sum(const NodePtr& a, std::size_t axis);
NodePtr reduce_mean(const NodePtr& a, std::size_t axis);
NodePtr reduce_variance(const NodePtr& a, std::size_t axis, VarianceEstimator estimator);
NodePtr bcast_add(const NodePtr& a, const NodePtr& v, std::size_t axis);
NodePtr bcast_sub(const NodePtr& a, const NodePtr& v, std::size_t axis);
NodePtr bcast_mul(const NodePtr& a, const NodePtr& v, std::size_t axis);
NodePtr bcast_div(const NodePtr& a, const NodePtr& v, std::size_t axis);

NodePtr sum_all(const NodePtr& a);   // scalar
NodePtr mean_all(const NodePtr& a);  // scalar

// --- linear algebra ---
NodePtr matmul(const NodePtr& a, const NodePtr& b);   // [N x K][K x M]
NodePtr matvec(const NodePtr& w, const NodePtr& x);   // [H x D][D]
// affine map W x + b with the bias optional (pass nullptr to omit it)
NodePtr affine(const NodePtr& w, const NodePtr& x, const NodePtr& b);
// rows-as-cases linear layer: X [N x D] times W [D x M] plus row-broadcast b [M]
NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b);

NodePtr slice(const NodePtr& a, std::size_t begin, std::size_t len);  // rank-1
NodePtr dot(const NodePtr& a, const NodePtr& b);  // scalar

// Mean negative log-likelihood of integer labels under row-wise softmax.
// logits [N x K], labels in [0, K). Numerically stabilized log-sum-exp.
NodePtr softmax_cross_entropy(const NodePtr& logits, std::vector<int> labels);

}  // namespace normlab

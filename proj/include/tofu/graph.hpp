#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tofu/dense_array.hpp"

namespace tofu {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One record in the define-by-run computation graph. The graph is rebuilt on
// every forward pass; leaves (parameters, constants) persist across passes and
// keep their gradient accumulators until reset explicitly.
struct Node {
  DenseArray value;
  DenseArray grad;  // allocated on first accumulation, same shape as value
  std::vector<NodePtr> parents;
  const char* op = "leaf";
  // Pulls this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backprop;
  bool requires_grad = true;
  uint64_t seq = 0;

  bool is_leaf() const { return parents.empty(); }
  DenseArray& ensure_grad();
};

NodePtr make_leaf(DenseArray value, bool requires_grad = true);
NodePtr make_constant(DenseArray value);
NodePtr make_op(DenseArray value, const char* op, std::vector<NodePtr> parents,
                std::function<void(Node&)> backprop);

// Reverse-mode sweep from a scalar loss. Gradients accumulate; call
// zero_grad between independent evaluations.
void backward(const NodePtr& loss);

void zero_grad(const NodePtr& node);
void zero_grad(std::span<const NodePtr> nodes);

}  // namespace tofu

#include "tofu/graph.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <unordered_set>

namespace tofu {

static std::atomic<uint64_t> g_seq{1};

DenseArray& Node::ensure_grad() {
  if (grad.empty() && value.size() > 0) grad = DenseArray::zeros_like(value);
  return grad;
}

NodePtr make_leaf(DenseArray value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->seq = g_seq.fetch_add(1);
  return n;
}

NodePtr make_constant(DenseArray value) { return make_leaf(std::move(value), false); }

NodePtr make_op(DenseArray value, const char* op, std::vector<NodePtr> parents,
                std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->requires_grad = false;
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backprop = std::move(backprop);
  n->seq = g_seq.fetch_add(1);
  return n;
}

void backward(const NodePtr& loss) {
  if (!loss) throw std::invalid_argument("backward: null node");
  if (loss->value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss->value.shape_str());

  // Creation order is already topological for a define-by-run graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.get()};
  seen.insert(loss.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

void zero_grad(const NodePtr& node) {
  if (node && !node->grad.empty()) node->grad.fill(0.0);
}

void zero_grad(std::span<const NodePtr> nodes) {
  for (const auto& n : nodes) zero_grad(n);
}

}  // namespace tofu

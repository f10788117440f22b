#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "n2n/core/array.hpp"

namespace n2n {

template <class T>
struct Node {
  Array<T> value;
  Array<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }

  Array<T>& grad_buffer() {
    if (grad.empty()) grad = Array<T>(value.shape());
    return grad;
  }
};

/// Differentiable handle around an Array. Copies share the same graph node.
template <class T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() : node_(std::make_shared<Node<T>>()) {}
  explicit Tensor(Array<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  /// Result of an operation. The graph edge is dropped when no parent needs a gradient.
  static Tensor from_op(Array<T> value, std::vector<Tensor> parents, std::function<void(Node<T>&)> backward) {
    Tensor out(std::move(value));
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs) {
      out.node_->requires_grad = true;
      for (auto& p : parents) out.node_->parents.push_back(p.node_);
      out.node_->backward_fn = std::move(backward);
    }
    return out;
  }

  const Array<T>& value() const { return node_->value; }
  Array<T>& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Array<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Array<T>(); }
  const NodePtr& node() const { return node_; }

  /// Same value, cut from the graph (gradient barrier).
  Tensor detach() const { return Tensor(node_->value, false); }

 private:
  NodePtr node_;
};

/// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
template <class T>
void backward(const Tensor<T>& loss) {
  require(loss.size() == 1, "backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node<T>* n : order)
    if (!n->is_leaf()) n->grad = Array<T>();

  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->is_leaf() && !n->grad.empty()) n->backward_fn(*n);
  }
}

namespace detail {

template <class T>
inline bool wants_grad(const Node<T>& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

template <class T>
inline Array<T>& parent_grad(Node<T>& self, std::size_t i) {
  return self.parents[i]->grad_buffer();
}

template <class T>
inline const Array<T>& parent_value(const Node<T>& self, std::size_t i) {
  return self.parents[i]->value;
}

}  // namespace detail

}  // namespace n2n

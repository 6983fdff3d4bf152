#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ign/tensor.hpp"

// Minimal tape-free reverse-mode differentiation over tensors.
//
// Every operation produces a Var that owns its value and, if any input needs a
// gradient, a closure that pushes the output gradient back into its inputs.
// Vars that need no gradient carry no parents, so detached values and frozen
// parameters cut the graph structurally.
namespace ign::ag {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::uint64_t generation = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;

  /// A value that never receives a gradient.
  static Var constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  /// A leaf that accumulates gradient (a trainable parameter or a probed input).
  static Var leaf(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Same value, no gradient path. The original keeps its own path.
  Var detach() const { return constant(node_->value); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}
  template <typename U>
  friend Var<U> make_result(Tensor<U>, std::vector<Var<U>>, std::function<void(Node<U>&)>);

  std::shared_ptr<Node<T>> node_;
};

/// Builds an op result. The backward closure is dropped when no input needs a
/// gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node_ptr());
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

/// Propagates d(loss)/d(.) to every reachable node. Gradients from earlier
/// calls on the same subgraph are discarded first. Returns the generation id
/// stamped on every node the call reached.
template <typename T>
std::uint64_t backward(const Var<T>& loss);

/// Gradient a leaf received in the given backward generation, or zeros.
template <typename T>
Tensor<T> gradient_of(const Var<T>& leaf, std::uint64_t generation) {
  const Node<T>* n = leaf.node();
  if (n && n->requires_grad && n->generation == generation && n->grad.size() == n->value.size()) return n->grad;
  return Tensor<T>(leaf.shape());
}

}  // namespace ign::ag

#include "ign/autograd.hpp"

#include <atomic>
#include <stdexcept>
#include <unordered_set>

namespace ign::ag {

namespace {
std::atomic<std::uint64_t> next_generation{1};
}

template <typename T>
std::uint64_t backward(const Var<T>& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on an undefined value");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  const std::uint64_t gen = next_generation.fetch_add(1);
  if (!loss.requires_grad()) return gen;

  // Iterative post-order DFS; reversed it is a valid topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
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

  for (Node<T>* n : order) {
    n->generation = gen;
    n->grad_buffer().fill(T(0));
  }
  loss.node()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
  // Interior gradients are no longer needed; leaves keep theirs.
  for (Node<T>* n : order) {
    if (!n->parents.empty()) n->grad = Tensor<T>();
  }
  return gen;
}

template std::uint64_t backward(const Var<float>&);
template std::uint64_t backward(const Var<double>&);

}  // namespace ign::ag

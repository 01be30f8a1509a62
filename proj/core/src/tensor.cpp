#include "slotframes/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace slotframes {

template <typename T>
Tensor<T> Tensor<T>::constant(Array<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Array<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->value.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(node_->value.shape()));
  }
  return node_->value[0];
}

namespace {

// Post-order DFS without recursion; the model graphs are deep enough (hundreds
// of nodes per slot-attention iteration) that recursion is best avoided.
template <typename T>
std::vector<Node<T>*> topological_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& root, const Array<T>& seed) {
  if (!root.requires_grad()) return;
  if (seed.shape() != root.shape()) {
    throw DimensionError("backward seed " + shape_str(seed.shape()) + " for root " + shape_str(root.shape()));
  }
  Node<T>* r = root.node().get();
  auto& g = r->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];

  auto order = topological_order(r);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <typename T>
void backward(const Tensor<T>& root) {
  if (root.size() != 1) {
    throw DimensionError("backward() needs a scalar root, got " + shape_str(root.shape()));
  }
  backward(root, Array<T>(root.shape(), T(1)));
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template void backward<float>(const Tensor<float>&, const Array<float>&);
template void backward<double>(const Tensor<double>&, const Array<double>&);

}  // namespace slotframes

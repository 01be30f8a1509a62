#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "slotframes/array.hpp"

namespace slotframes {

template <typename T>
struct Node {
  Array<T> value;
  Array<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads `grad` of the node it is attached to and accumulates into parents.
  std::function<void(Node&)> backward;

  Array<T>& ensure_grad() {
    if (grad.empty()) grad = Array<T>(value.shape());
    return grad;
  }
};

/// Handle to a value in a reverse-mode autodiff graph.
///
/// Graphs are built per forward call: every op allocates a node that keeps its
/// parents alive, so dropping the last handle to the loss releases the graph.
/// Leaves created with `Tensor::leaf` accumulate gradients in `grad()`.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Array<T> value);
  static Tensor leaf(Array<T> value);

  bool defined() const { return node_ != nullptr; }
  const Array<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t rank() const { return node_->value.rank(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Gradient accumulated by `backward`; nullptr if nothing reached this node.
  const Array<T>* grad() const { return node_->grad.empty() ? nullptr : &node_->grad; }
  void zero_grad() { node_->grad = Array<T>(); }

  T item() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op result. When no parent requires a gradient the result is a
/// constant and `backward` is dropped.
template <typename T>
Tensor<T> make_result(Array<T> value, std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

/// Runs the reverse pass from a scalar root in explicit topological order.
template <typename T>
void backward(const Tensor<T>& root);

/// Same as backward() but seeds the root with an arbitrary upstream gradient.
template <typename T>
void backward(const Tensor<T>& root, const Array<T>& seed);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace slotframes

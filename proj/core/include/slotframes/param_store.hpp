#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slotframes/tensor.hpp"

namespace slotframes {

/// Named parameters in insertion order. Every entry is trainable.
template <typename T>
class ParamStore {
 public:
  void add(std::string name, Array<T> value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Array<T>& get(const std::string& name) const;
  Array<T>& get(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;
  const std::vector<std::pair<std::string, Array<T>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Array<T>>>& entries() { return entries_; }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, value] : entries_) out.add(name, value.template cast<U>());
    return out;
  }

 private:
  std::vector<std::pair<std::string, Array<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-forward view of a ParamStore. Leaves are created on first use, so each
/// forward pass gets its own graph and its own gradient buffers.
template <typename T>
class ParamBinding {
 public:
  explicit ParamBinding(const ParamStore<T>& store, bool trainable = true) : store_(&store), trainable_(trainable) {}

  const Tensor<T>& operator()(const std::string& name);
  /// Uses `value` for `name` in this forward pass instead of the stored array.
  void substitute(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const { return store_->contains(name); }

  /// Gradients in store order; zero-filled for parameters the forward pass
  /// never touched.
  std::vector<Array<T>> gradients() const;

 private:
  const ParamStore<T>* store_;
  bool trainable_;
  std::unordered_map<std::string, Tensor<T>> leaves_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class ParamBinding<float>;
extern template class ParamBinding<double>;

}  // namespace slotframes

#include "slotframes/param_store.hpp"

namespace slotframes {

template <typename T>
void ParamStore<T>::add(std::string name, Array<T> value) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

template <typename T>
const Array<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

template <typename T>
Array<T>& ParamStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

template <typename T>
std::size_t ParamStore<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

template <typename T>
const Tensor<T>& ParamBinding<T>::operator()(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  const Array<T>& value = store_->get(name);
  auto leaf = trainable_ ? Tensor<T>::leaf(value) : Tensor<T>::constant(value);
  return leaves_.emplace(name, std::move(leaf)).first->second;
}

template <typename T>
void ParamBinding<T>::substitute(const std::string& name, Tensor<T> value) {
  if (value.shape() != store_->get(name).shape()) {
    throw DimensionError("substitute '" + name + "': shape " + shape_str(value.shape()) + " vs stored " +
                         shape_str(store_->get(name).shape()));
  }
  leaves_[name] = std::move(value);
}

template <typename T>
std::vector<Array<T>> ParamBinding<T>::gradients() const {
  std::vector<Array<T>> out;
  out.reserve(store_->size());
  for (const auto& [name, value] : store_->entries()) {
    auto it = leaves_.find(name);
    if (it != leaves_.end() && it->second.grad() != nullptr) {
      out.push_back(*it->second.grad());
    } else {
      out.emplace_back(value.shape());
    }
  }
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class ParamBinding<float>;
template class ParamBinding<double>;

}  // namespace slotframes

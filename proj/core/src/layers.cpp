#include "slotframes/layers.hpp"

#include <cmath>

namespace slotframes {

Array<float> truncated_normal_fan_in(const Shape& shape, std::size_t fan_in, Rng& rng) {
  // 0.8796 undoes the variance lost to truncation at +-2 sigma.
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in)) / 0.87962566103423978;
  Array<float> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(stddev * rng.truncated_normal());
  return out;
}

void register_dense(ParamStore<float>& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                    bool bias) {
  store.add(prefix + "/w", truncated_normal_fan_in(Shape{in, out}, in, rng));
  if (bias) store.add(prefix + "/b", Array<float>(Shape{out}));
}

void register_layer_norm(ParamStore<float>& store, const std::string& prefix, std::size_t dim) {
  store.add(prefix + "/gain", Array<float>(Shape{dim}, 1.0f));
  store.add(prefix + "/bias", Array<float>(Shape{dim}));
}

void register_mlp(ParamStore<float>& store, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng,
                  bool pre_norm) {
  if (widths.size() < 2) throw ConfigError("mlp '" + prefix + "' needs input and output widths");
  if (pre_norm) register_layer_norm(store, prefix + "/norm", widths.front());
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    register_dense(store, prefix + "/dense" + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

template <typename T>
Dense<T> Dense<T>::bind(ParamBinding<T>& params, const std::string& prefix) {
  Dense d;
  d.weight = params(prefix + "/w");
  if (params.contains(prefix + "/b")) d.bias = params(prefix + "/b");
  return d;
}

template <typename T>
LayerNorm<T> LayerNorm<T>::bind(ParamBinding<T>& params, const std::string& prefix) {
  return LayerNorm{params(prefix + "/gain"), params(prefix + "/bias")};
}

template <typename T>
Mlp<T> Mlp<T>::bind(ParamBinding<T>& params, const std::string& prefix) {
  Mlp m;
  if (params.contains(prefix + "/norm/gain")) {
    m.pre_norm = true;
    m.norm = LayerNorm<T>::bind(params, prefix + "/norm");
  }
  for (std::size_t i = 0; params.contains(prefix + "/dense" + std::to_string(i) + "/w"); ++i) {
    m.layers.push_back(Dense<T>::bind(params, prefix + "/dense" + std::to_string(i)));
  }
  if (m.layers.empty()) throw ConfigError("mlp '" + prefix + "' has no layers");
  return m;
}

template <typename T>
Tensor<T> Mlp<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> h = pre_norm ? norm(x) : x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

template struct Dense<float>;
template struct Dense<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Mlp<float>;
template struct Mlp<double>;

}  // namespace slotframes

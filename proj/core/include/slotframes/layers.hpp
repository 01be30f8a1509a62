#pragma once

#include <string>
#include <vector>

#include "slotframes/ops.hpp"
#include "slotframes/param_store.hpp"
#include "slotframes/rng.hpp"

namespace slotframes {

// Parameter initializers. Weight matrices use truncated-normal fan-in
// scaling (std 1/sqrt(fan_in), cut at two standard deviations).
Array<float> truncated_normal_fan_in(const Shape& shape, std::size_t fan_in, Rng& rng);

void register_dense(ParamStore<float>& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                    bool bias = true);
void register_layer_norm(ParamStore<float>& store, const std::string& prefix, std::size_t dim);
void register_mlp(ParamStore<float>& store, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng,
                  bool pre_norm);

/// x * w (+ b)
template <typename T>
struct Dense {
  Tensor<T> weight;
  Tensor<T> bias;  // undefined for bias-free projections

  static Dense bind(ParamBinding<T>& params, const std::string& prefix);
  Tensor<T> operator()(const Tensor<T>& x) const { return bias.defined() ? linear(x, weight, bias) : linear(x, weight); }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNorm bind(ParamBinding<T>& params, const std::string& prefix);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }
};

/// Dense layers with ReLU between them (none after the last), optionally
/// preceded by a layer norm.
template <typename T>
struct Mlp {
  bool pre_norm = false;
  LayerNorm<T> norm;
  std::vector<Dense<T>> layers;

  static Mlp bind(ParamBinding<T>& params, const std::string& prefix);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

}  // namespace slotframes

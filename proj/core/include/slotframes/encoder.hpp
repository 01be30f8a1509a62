#pragma once

#include "slotframes/config.hpp"
#include "slotframes/layers.hpp"

namespace slotframes {

void register_encoder_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng);

/// CNN backbone: image [H,W,3] -> tokens [H'*W', channels], row-major over
/// the feature map. ReLU follows every convolution.
template <typename T>
Tensor<T> encode(const Tensor<T>& image, const ModelConfig& cfg, ParamBinding<T>& params);

}  // namespace slotframes

#pragma once

#include "slotframes/config.hpp"
#include "slotframes/posegrid.hpp"

namespace slotframes {

template <typename T>
struct DecodedSlots {
  Tensor<T> rgb;           // [K,H,W,3]
  Tensor<T> alpha_logits;  // [K,H,W,1]
  Tensor<T> alpha;         // [K,H,W,1], softmax over slots
};

void register_decoder_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng);

/// Tiles latents [K,D] into [K,H,W,D].
template <typename T>
Tensor<T> spatial_broadcast(const Tensor<T>& latents, std::size_t height, std::size_t width);

/// Spatial broadcast decoder. `grid` is the absolute grid at the broadcast
/// resolution (the token grid); `frames` are the final slot frames.
/// Invariant variants add h(rel_grid), SA adds h(abs_grid).
template <typename T>
DecodedSlots<T> decode(const Tensor<T>& latents, const SlotFrames<T>& frames, const AbsGrid<T>& grid,
                       const ModelConfig& cfg, ParamBinding<T>& params);

/// Per-pixel sum_k alpha_k * rgb_k, [H,W,3].
template <typename T>
Tensor<T> composite(const DecodedSlots<T>& d);

}  // namespace slotframes

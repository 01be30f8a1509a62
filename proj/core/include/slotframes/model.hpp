#pragma once

#include <cstdint>

#include "slotframes/attention.hpp"
#include "slotframes/decoder.hpp"
#include "slotframes/encoder.hpp"

namespace slotframes {

/// Every trainable parameter of the autoencoder for `cfg`, initialized from
/// `seed`. Slot latents start from N(0, 1).
ParamStore<float> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
struct ModelOutput {
  SlotState<T> slots;
  DecodedSlots<T> decoded;
  Tensor<T> reconstruction;  // [H,W,3]
};

/// Encoder, slot attention and decoder for one image.
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const AbsGrid<T>& grid() const { return grid_; }

  /// Initial slot state: learned latents and frames drawn per FrameInitSpec.
  SlotState<T> initial_state(ParamBinding<T>& params, Rng& rng) const;

  /// `rng` feeds sampled frame initialization only.
  ModelOutput<T> forward(ParamBinding<T>& params, const Tensor<T>& image, Rng& rng) const;
  ModelOutput<T> forward_from(ParamBinding<T>& params, const Tensor<T>& image, const SlotState<T>& init) const;

 private:
  ModelConfig cfg_;
  AbsGrid<T> grid_;
};

/// Mean squared error over pixels and channels.
template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& reconstruction, const Tensor<T>& image);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace slotframes

#pragma once

#include "slotframes/layers.hpp"
#include "slotframes/slot_frames.hpp"

namespace slotframes {

/// Absolute token coordinates: row-major over the token map, (x, y) per token,
/// x along the width and y along the height, both spanning [-1, 1] with the
/// endpoints included.
template <typename T>
struct AbsGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  Array<T> coords;  // [N,2]

  std::size_t num_tokens() const { return height * width; }
  Tensor<T> tensor() const { return Tensor<T>::constant(coords); }
};

template <typename T>
AbsGrid<T> make_abs_grid(std::size_t height, std::size_t width);

/// Per-slot grids [K,N,2]: rotate (abs - S_p) by S_r^-1, then divide per axis
/// by S_s * delta. `use_rotation` false treats S_r as the identity and
/// `use_scale` false skips the division (translation-only frames).
template <typename T>
Tensor<T> make_rel_grid(const Tensor<T>& abs, const SlotFrames<T>& frames, T delta, bool use_rotation,
                        bool use_scale = true);

/// Pointwise affine projection of [...,2] coordinates.
template <typename T>
Tensor<T> encode_grid(const Tensor<T>& grid, const Dense<T>& proj);

}  // namespace slotframes

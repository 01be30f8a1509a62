#pragma once

#include "slotframes/tensor.hpp"

namespace slotframes {

/// Per-slot reference frames in grid units.
template <typename T>
struct SlotFrames {
  Tensor<T> position;  // [K,2] S_p
  Tensor<T> scale;     // [K,2] S_s, every entry >= kScaleFloor
  Tensor<T> rotation;  // [K,2,2] S_r, proper rotations

  std::size_t num_slots() const { return position.dim(0); }
};

inline constexpr double kScaleFloor = 1e-3;

}  // namespace slotframes

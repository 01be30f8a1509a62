#pragma once

#include <array>

#include "slotframes/config.hpp"
#include "slotframes/posegrid.hpp"

namespace slotframes {

// Frame estimation from attention masks. All estimators are batched over
// slots: attn is [K,N] (each row already normalized over tokens), abs is the
// [N,2] token grid. Everything here is differentiable.

/// Attention-weighted center of mass, [K,2]. The mass is clamped at 1e-8 so
/// an all-zero row maps to (0, 0).
template <typename T>
Tensor<T> estimate_position(const Tensor<T>& attn, const Tensor<T>& abs);

/// Per-axis spread sqrt(sum (a+eps) d^2 / sum (a+eps)), [K,2], where d is
/// the offset from `position`, rotated into the slot frame when `rotation` is
/// given. Clamped below at kScaleFloor.
template <typename T>
Tensor<T> estimate_scale(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position,
                         const Tensor<T>* rotation, T eps);

/// Weighted 2x2 covariance of the offsets from `position`, [K,3] holding
/// (cxx, cxy, cyy).
template <typename T>
Tensor<T> weighted_covariance(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position);

/// Closed-form principal axes of each covariance, post-processed into a
/// proper rotation with angle in (-45, 45] degrees; [K,2,2], first column is
/// the principal axis. Covariances with eigenvalue gap below
/// kIsotropicGap map to the identity and pass no gradient.
template <typename T>
Tensor<T> rotation_from_covariance(const Tensor<T>& cov);

template <typename T>
Tensor<T> estimate_rotation(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position);

inline constexpr double kIsotropicGap = 1e-6;

/// Row-major 2x2 matrix {m00, m01, m10, m11}; columns are axes.
using Mat2 = std::array<double, 4>;
using Vec2 = std::array<double, 2>;

/// Turns orthonormal axes (v1 principal, v2 secondary) into the rotation
/// whose first column is v1 up to a multiple of 90 degrees: v2 is flipped if
/// the pair is mirrored, then columns are cycled (c1, c2) -> (-c2, c1) until
/// the angle lies in (-45, 45] degrees. Throws if the axes are not
/// orthonormal.
Mat2 post_process_axes(const Vec2& v1, const Vec2& v2);

/// [K] angles -> [K,2,2] rotations [[cos, -sin], [sin, cos]].
template <typename T>
Tensor<T> rotation_matrices(const Tensor<T>& angles);

template <typename T>
Tensor<T> identity_rotations(std::size_t k);

void register_frame_params(ParamStore<float>& store, std::size_t num_slots, Rng& rng);

/// Initial frames for one forward pass. Sampled mode draws fresh frames from
/// `rng` on every call; learned mode reads the "frames/..." parameters.
/// Rotations stay at the identity unless `use_rotation` is set and
/// `spec.identity_rotation` is false.
template <typename T>
SlotFrames<T> init_frames(const FrameInitSpec& spec, std::size_t num_slots, bool use_rotation, Rng& rng,
                          ParamBinding<T>* params);

}  // namespace slotframes

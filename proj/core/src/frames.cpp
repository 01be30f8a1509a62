#include "slotframes/frames.hpp"

#include <cmath>
#include <numbers>

namespace slotframes {

template <typename T>
Tensor<T> estimate_position(const Tensor<T>& attn, const Tensor<T>& abs) {
  const auto mass = clamp_min(sum_axis(attn, 1, true), T(1e-8));  // [K,1]
  return div(matmul(attn, abs), mass);
}

namespace {

// [N,2] - [K,2] -> [K,N,2]
template <typename T>
Tensor<T> offsets(const Tensor<T>& abs, const Tensor<T>& position) {
  return sub(abs, reshape(position, Shape{position.dim(0), 1, 2}));
}

// sum_n w[k,n] v[k,n,:] for w [K,N], v [K,N,C] -> [K,C]
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& w, const Tensor<T>& v) {
  const std::size_t k = w.dim(0), n = w.dim(1), c = v.dim(2);
  return reshape(bmm(reshape(w, Shape{k, 1, n}), v), Shape{k, c});
}

}  // namespace

template <typename T>
Tensor<T> estimate_scale(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position,
                         const Tensor<T>* rotation, T eps) {
  auto d = offsets(abs, position);
  if (rotation != nullptr) d = bmm(d, *rotation);
  const auto w = add_scalar(attn, eps);
  const auto var = div(weighted_sum(w, square(d)), sum_axis(w, 1, true));
  const T floor = static_cast<T>(kScaleFloor);
  return sqrt(clamp_min(var, floor * floor));
}

template <typename T>
Tensor<T> weighted_covariance(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position) {
  const auto d = offsets(abs, position);
  const auto dx = slice(d, 2, 0, 1);
  const auto dy = slice(d, 2, 1, 1);
  const auto moments = concat<T>({mul(dx, dx), mul(dx, dy), mul(dy, dy)}, 2);
  const auto mass = clamp_min(sum_axis(attn, 1, true), T(1e-8));
  return div(weighted_sum(attn, moments), mass);
}

Mat2 post_process_axes(const Vec2& v1, const Vec2& v2) {
  const double n1 = v1[0] * v1[0] + v1[1] * v1[1];
  const double n2 = v2[0] * v2[0] + v2[1] * v2[1];
  const double dot = v1[0] * v2[0] + v1[1] * v2[1];
  if (std::abs(n1 - 1.0) > 1e-6 || std::abs(n2 - 1.0) > 1e-6 || std::abs(dot) > 1e-6) {
    throw NumericError("post_process_axes: axes are not orthonormal");
  }
  Vec2 c1 = v1;
  Vec2 c2 = v2;
  // det [c1 c2] < 0 means a mirrored frame.
  if (c1[0] * c2[1] - c1[1] * c2[0] < 0.0) c2 = {-c2[0], -c2[1]};
  // Each step rotates the frame by -90 degrees without rounding.
  const double quarter = std::numbers::pi / 2.0;
  double angle = std::atan2(c1[1], c1[0]);
  int steps = static_cast<int>(std::lround(angle / quarter));
  if (angle - steps * quarter <= -quarter / 2.0) --steps;
  steps = ((steps % 4) + 4) % 4;
  for (int s = 0; s < steps; ++s) {
    const Vec2 next1 = {-c2[0], -c2[1]};
    c2 = c1;
    c1 = next1;
  }
  return Mat2{c1[0], c2[0], c1[1], c2[1]};
}

template <typename T>
Tensor<T> rotation_from_covariance(const Tensor<T>& cov) {
  if (cov.rank() != 2 || cov.dim(1) != 3) {
    throw DimensionError("rotation_from_covariance expects [K,3], got " + shape_str(cov.shape()));
  }
  const std::size_t k = cov.dim(0);
  Array<T> out(Shape{k, 2, 2});
  const auto& c = cov.value();
  for (std::size_t s = 0; s < k; ++s) {
    const double a = c[s * 3], b = c[s * 3 + 1], d = c[s * 3 + 2];
    const double u = a - d, v = 2.0 * b;
    const double gap = std::sqrt(u * u + v * v);
    Mat2 r{1.0, 0.0, 0.0, 1.0};
    if (gap >= kIsotropicGap) {
      // Eigenvector of the larger eigenvalue, built from the better
      // conditioned row of (C - lambda1 I).
      Vec2 v1 = u >= 0.0 ? Vec2{(u + gap) / 2.0, b} : Vec2{b, (gap - u) / 2.0};
      const double norm = std::hypot(v1[0], v1[1]);
      v1 = {v1[0] / norm, v1[1] / norm};
      r = post_process_axes(v1, Vec2{-v1[1], v1[0]});
    }
    for (std::size_t i = 0; i < 4; ++i) out[s * 4 + i] = static_cast<T>(r[i]);
  }
  return make_result<T>(std::move(out), {cov}, [k](Node<T>& self) {
    auto& pc = *self.parents[0];
    auto& gc = pc.ensure_grad();
    const auto& g = self.grad;
    const auto& r = self.value;
    for (std::size_t s = 0; s < k; ++s) {
      const double a = pc.value[s * 3], b = pc.value[s * 3 + 1], d = pc.value[s * 3 + 2];
      const double u = a - d, v = 2.0 * b;
      const double gap2 = u * u + v * v;
      if (std::sqrt(gap2) < kIsotropicGap) continue;
      // R = [[cos t, -sin t], [sin t, cos t]], t = atan2(v, u) / 2 + n * 90deg.
      const double cs = r[s * 4], sn = r[s * 4 + 2];
      const double g_angle = -g[s * 4] * sn - g[s * 4 + 1] * cs + g[s * 4 + 2] * cs - g[s * 4 + 3] * sn;
      const double dt_du = -0.5 * v / gap2;
      const double dt_dv = 0.5 * u / gap2;
      gc[s * 3] += static_cast<T>(g_angle * dt_du);
      gc[s * 3 + 1] += static_cast<T>(g_angle * dt_dv * 2.0);
      gc[s * 3 + 2] -= static_cast<T>(g_angle * dt_du);
    }
  });
}

template <typename T>
Tensor<T> estimate_rotation(const Tensor<T>& attn, const Tensor<T>& abs, const Tensor<T>& position) {
  return rotation_from_covariance(weighted_covariance(attn, abs, position));
}

template <typename T>
Tensor<T> rotation_matrices(const Tensor<T>& angles) {
  const std::size_t k = angles.size();
  const auto a = reshape(angles, Shape{k, 1});
  const auto c = cos(a);
  const auto s = sin(a);
  return reshape(concat<T>({c, neg(s), s, c}, 1), Shape{k, 2, 2});
}

template <typename T>
Tensor<T> identity_rotations(std::size_t k) {
  Array<T> eye(Shape{k, 2, 2});
  for (std::size_t s = 0; s < k; ++s) {
    eye[s * 4] = T(1);
    eye[s * 4 + 3] = T(1);
  }
  return Tensor<T>::constant(std::move(eye));
}

void register_frame_params(ParamStore<float>& store, std::size_t num_slots, Rng& rng) {
  Array<float> position(Shape{num_slots, 2});
  Array<float> scale(Shape{num_slots, 2});
  Array<float> angle(Shape{num_slots});
  for (std::size_t i = 0; i < position.size(); ++i) position[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < scale.size(); ++i) scale[i] = static_cast<float>(rng.normal(0.1, 0.01));
  for (std::size_t i = 0; i < angle.size(); ++i) {
    angle[i] = static_cast<float>(std::numbers::pi / 4.0 * std::tanh(rng.normal(0.0, 0.1)));
  }
  store.add("frames/position", std::move(position));
  store.add("frames/scale", std::move(scale));
  store.add("frames/angle", std::move(angle));
}

template <typename T>
SlotFrames<T> init_frames(const FrameInitSpec& spec, std::size_t num_slots, bool use_rotation, Rng& rng,
                          ParamBinding<T>* params) {
  const bool rotate = use_rotation && !spec.identity_rotation;
  const T floor = static_cast<T>(kScaleFloor);
  SlotFrames<T> f;
  if (spec.mode == FrameInitMode::kLearned) {
    if (params == nullptr) throw ConfigError("learned frame init needs parameters");
    f.position = (*params)("frames/position");
    f.scale = clamp_min((*params)("frames/scale"), floor);
    f.rotation = rotate ? rotation_matrices((*params)("frames/angle")) : identity_rotations<T>(num_slots);
    return f;
  }
  Array<T> position(Shape{num_slots, 2});
  Array<T> scale(Shape{num_slots, 2});
  for (std::size_t i = 0; i < position.size(); ++i) position[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < scale.size(); ++i) {
    scale[i] = std::max(static_cast<T>(rng.normal(0.1, 0.1)), floor);
  }
  f.position = Tensor<T>::constant(std::move(position));
  f.scale = Tensor<T>::constant(std::move(scale));
  if (rotate) {
    Array<T> angle(Shape{num_slots});
    for (std::size_t i = 0; i < num_slots; ++i) {
      angle[i] = static_cast<T>(rng.uniform(-std::numbers::pi / 4.0, std::numbers::pi / 4.0));
    }
    f.rotation = rotation_matrices(Tensor<T>::constant(std::move(angle)));
  } else {
    f.rotation = identity_rotations<T>(num_slots);
  }
  return f;
}

#define SLOTFRAMES_FRAMES(T)                                                                                  \
  template Tensor<T> estimate_position(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> estimate_scale(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, T); \
  template Tensor<T> weighted_covariance(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> rotation_from_covariance(const Tensor<T>&);                                               \
  template Tensor<T> estimate_rotation(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> rotation_matrices(const Tensor<T>&);                                                      \
  template Tensor<T> identity_rotations<T>(std::size_t);                                                       \
  template SlotFrames<T> init_frames(const FrameInitSpec&, std::size_t, bool, Rng&, ParamBinding<T>*);

SLOTFRAMES_FRAMES(float)
SLOTFRAMES_FRAMES(double)

#undef SLOTFRAMES_FRAMES

}  // namespace slotframes

#pragma once

#include <cmath>
#include <numbers>

#include "slotframes/frames.hpp"

namespace slotframes::verify {

inline Array<double> random_uniform(const Shape& s, Rng& rng, double lo, double hi) {
  Array<double> a(s);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(lo, hi);
  return a;
}

inline Array<double> random_normal(const Shape& s, Rng& rng) {
  Array<double> a(s);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  return a;
}

// Magnitude in [lo, hi] with a random sign.
inline Array<double> random_signed_away(const Shape& s, Rng& rng, double lo, double hi) {
  Array<double> a(s);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (rng.below(2) == 0 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return a;
}

// Angular distance of a principal-axis angle from the +-45 degree cut where
// the post-processed rotation jumps by 90 degrees.
inline double distance_to_branch_cut(double theta) {
  return std::abs(std::remainder(theta - std::numbers::pi / 4.0, std::numbers::pi / 2.0));
}

// True when every slot's covariance has a clear eigenvalue gap and a principal
// axis at least two degrees from the branch cut, i.e. the rotation estimate
// is differentiable with room for finite differences.
inline bool rotation_is_smooth(const Tensor<double>& attn, const Tensor<double>& abs) {
  const auto cov = weighted_covariance(attn, abs, estimate_position(attn, abs)).value();
  for (std::size_t s = 0; s < cov.dim(0); ++s) {
    const double u = cov[s * 3] - cov[s * 3 + 2], v = 2.0 * cov[s * 3 + 1];
    if (std::hypot(u, v) < 1e-3) return false;
    if (distance_to_branch_cut(0.5 * std::atan2(v, u)) < 2.0 * std::numbers::pi / 180.0) return false;
  }
  return true;
}

// Small stride-1 model on a 4x4 image: K=2, width 8.
inline ModelConfig tiny_model_config(Variant v) {
  ModelConfig cfg;
  cfg.image_height = 4;
  cfg.image_width = 4;
  cfg.num_slots = 2;
  cfg.slot_dim = 8;
  cfg.attn_dim = 8;
  cfg.mlp_hidden = 16;
  cfg.variant.mode = v;
  cfg.encoder.channels = 8;
  cfg.encoder.kernel = 3;
  cfg.encoder.strides = {1};
  cfg.decoder.hidden = 16;
  cfg.decoder.mlp_layers = 3;
  cfg.validate();
  return cfg;
}

}  // namespace slotframes::verify

#include <chrono>
#include <cmath>
#include <cstring>

#include "slotframes/model.hpp"
#include "slotframes/scene_synth.hpp"
#include "slotframes/verify.hpp"
#include "verify_util.hpp"

namespace slotframes::verify {

namespace {

// Rows of a [K,...] array reordered so row i of the result is row perm[i].
template <typename T>
Array<T> permute_rows(const Array<T>& a, const std::vector<std::size_t>& perm) {
  Array<T> out(a.shape());
  const std::size_t row = a.size() / a.dim(0);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::memcpy(out.ptr() + i * row, a.ptr() + perm[i] * row, row * sizeof(T));
  }
  return out;
}

template <typename T>
bool bitwise_equal(const Array<T>& a, const Array<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(T)) == 0;
}

}  // namespace

SuiteReport structural_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.variant.mode = Variant::kIsaTSR;
  const Model<float> model(cfg);
  const auto store = init_params(cfg, 11);
  const Model<double> dmodel(cfg);
  const auto dstore = store.cast<double>();
  const std::size_t k = cfg.num_slots;
  const std::size_t scenes = 3;

  double col_err = 0, alpha_err = 0, orth_err = 0, consist_err = 0;
  std::size_t perm_mismatch = 0, dead_skipped = 0;
  for (std::size_t c = 0; c < scenes; ++c) {
    const auto scene = generate_scene(DatasetSpec{}, derive_seed(3000, c));
    const auto image = Tensor<float>::constant(scene.image);
    ParamBinding<float> params(store, false);
    Rng rng(derive_seed(3001, c));
    const auto init = model.initial_state(params, rng);
    const auto out = model.forward_from(params, image, init);
    const auto& st = out.slots;

    const auto& attn = st.attn.value();
    const std::size_t n = attn.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) s += attn[j * n + i];
      col_err = std::max(col_err, std::abs(s - 1.0));
    }
    const auto& alpha = out.decoded.alpha.value();
    const std::size_t px = alpha.size() / k;
    for (std::size_t i = 0; i < px; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) s += alpha[j * px + i];
      alpha_err = std::max(alpha_err, std::abs(s - 1.0));
    }
    const auto& rot = st.frames.rotation.value();
    for (std::size_t j = 0; j < k; ++j) {
      const double a = rot[j * 4], b = rot[j * 4 + 1], cc = rot[j * 4 + 2], d = rot[j * 4 + 3];
      orth_err = std::max({orth_err, std::abs(a * a + cc * cc - 1.0), std::abs(b * b + d * d - 1.0),
                           std::abs(a * b + cc * d), std::abs(a * d - b * cc - 1.0)});
    }

    // Frame consistency is a property of the loop, so it is checked on the
    // double-precision model where rounding cannot hide a mismatch. Frames
    // are re-estimated from the returned attention.
    ParamBinding<double> dparams(dstore, false);
    SlotState<double> dinit;
    dinit.latents = Tensor<double>::constant(init.latents.value().cast<double>());
    dinit.frames.position = Tensor<double>::constant(init.frames.position.value().cast<double>());
    dinit.frames.scale = Tensor<double>::constant(init.frames.scale.value().cast<double>());
    dinit.frames.rotation = Tensor<double>::constant(init.frames.rotation.value().cast<double>());
    const auto dst = dmodel.forward_from(dparams, Tensor<double>::constant(scene.image.cast<double>()), dinit).slots;
    const auto& dattn = dst.attn;
    const auto norm_d = div(dattn, clamp_min(sum_axis(dattn, 1, true), 1e-8));
    const auto abs_d = dmodel.grid().tensor();
    const auto p = estimate_position(norm_d, abs_d);
    const auto r = estimate_rotation(norm_d, abs_d, p);
    const auto s = estimate_scale<double>(norm_d, abs_d, p, &r, cfg.grid.epsilon);
    const auto& f = dst.frames;
    for (std::size_t j = 0; j < k; ++j) {
      double mass = 0;
      for (std::size_t i = 0; i < n; ++i) mass += dattn.value()[j * n + i];
      if (mass < kDeadSlotMass) {
        ++dead_skipped;
        continue;
      }
      for (std::size_t e = 0; e < 2; ++e) {
        consist_err = std::max(consist_err, std::abs(p.value()[j * 2 + e] - f.position.value()[j * 2 + e]));
        consist_err = std::max(consist_err, std::abs(s.value()[j * 2 + e] - f.scale.value()[j * 2 + e]));
      }
      for (std::size_t e = 0; e < 4; ++e) {
        consist_err = std::max(consist_err, std::abs(r.value()[j * 4 + e] - f.rotation.value()[j * 4 + e]));
      }
    }

    // Permute the initial slots and frames; every per-slot output must move
    // with them, bit for bit.
    std::vector<std::size_t> perm(k);
    for (std::size_t j = 0; j < k; ++j) perm[j] = (j + 1 + c) % k;
    SlotState<float> pinit;
    pinit.latents = Tensor<float>::constant(permute_rows(init.latents.value(), perm));
    pinit.frames.position = Tensor<float>::constant(permute_rows(init.frames.position.value(), perm));
    pinit.frames.scale = Tensor<float>::constant(permute_rows(init.frames.scale.value(), perm));
    pinit.frames.rotation = Tensor<float>::constant(permute_rows(init.frames.rotation.value(), perm));
    const auto pout = model.forward_from(params, image, pinit);
    const auto& ps = pout.slots;
    const std::vector<std::pair<const Array<float>*, const Array<float>*>> pairs = {
        {&st.latents.value(), &ps.latents.value()},
        {&st.attn.value(), &ps.attn.value()},
        {&st.frames.position.value(), &ps.frames.position.value()},
        {&st.frames.scale.value(), &ps.frames.scale.value()},
        {&st.frames.rotation.value(), &ps.frames.rotation.value()},
        {&out.decoded.rgb.value(), &pout.decoded.rgb.value()},
        {&out.decoded.alpha.value(), &pout.decoded.alpha.value()}};
    for (const auto& [a, b] : pairs) {
      if (!bitwise_equal(permute_rows(*a, perm), *b)) ++perm_mismatch;
    }
  }

  SuiteReport r;
  r.suite = "structural";
  const std::string detail = std::to_string(scenes) + " tetromino scenes, ISA-TSR, 35x35, K=4, float";
  r.properties = {
      {"structural/attention_columns_sum_to_one", col_err <= 1e-5, col_err, 1e-5, detail},
      {"structural/alpha_sums_to_one", alpha_err <= 1e-5, alpha_err, 1e-5, detail},
      {"structural/rotation_orthogonal_det_one", orth_err <= 1e-5, orth_err, 1e-5, detail},
      {"structural/permutation_equivariance_bitexact", perm_mismatch == 0, static_cast<double>(perm_mismatch), 0.0,
       "mismatching outputs among latents, attn, frames, rgb, alpha"},
      {"structural/frame_consistency", consist_err <= 1e-6, consist_err, 1e-6,
       "same scenes in double precision, " + std::to_string(dead_skipped) + " dead slots skipped"},
  };
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slotframes::verify

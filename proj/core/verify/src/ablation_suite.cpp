#include <chrono>
#include <cmath>
#include <cstring>

#include "slotframes/model.hpp"
#include "slotframes/scene_synth.hpp"
#include "slotframes/verify.hpp"
#include "verify_util.hpp"

namespace slotframes::verify {

namespace {

using TensorD = Tensor<double>;

// Largest |gradient| of a loss on the final frames alone, over every
// parameter and the input tokens.
double frame_loss_gradient(bool stop_grad, std::size_t instance) {
  ModelConfig cfg = tiny_model_config(Variant::kIsaTSR);
  cfg.variant.stop_grad_frames = stop_grad;
  const auto store = init_params(cfg, 21 + instance).cast<double>();
  const auto grid = make_abs_grid<double>(4, 4);
  Rng rng(derive_seed(5000, instance));
  const auto tokens = TensorD::leaf(random_uniform(Shape{16, cfg.encoder.channels}, rng, -1, 1));
  ParamBinding<double> params(store);
  SlotState<double> init;
  init.latents = params("slots/init");
  init.frames = init_frames<double>(cfg.frame_init, cfg.num_slots, true, rng, nullptr);
  const auto st = run_isa(tokens, grid, init, cfg, AttentionWeights<double>::bind(params));
  const auto& f = st.frames;
  const auto loss =
      add(add(sum(mul(f.position, TensorD::constant(random_normal(f.position.shape(), rng)))),
              sum(mul(f.scale, TensorD::constant(random_normal(f.scale.shape(), rng))))),
          sum(mul(f.rotation, TensorD::constant(random_normal(f.rotation.shape(), rng)))));
  if (!loss.requires_grad()) return 0.0;
  backward(loss);
  double m = 0.0;
  if (const auto* g = tokens.grad()) {
    for (std::size_t i = 0; i < g->size(); ++i) m = std::max(m, std::abs((*g)[i]));
  }
  for (const auto& g : params.gradients()) {
    for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i]));
  }
  return m;
}

std::vector<PropertyResult> stop_grad_checks() {
  double with = 0.0, without = INFINITY;
  for (std::size_t i = 0; i < 5; ++i) {
    with = std::max(with, frame_loss_gradient(true, i));
    without = std::min(without, frame_loss_gradient(false, i));
  }
  return {{"ablation/stop_grad_frames_zero", with == 0.0, with, 0.0,
           "max |grad| of a frames-only loss with stop_grad_frames, 5 instances"},
          {"ablation/frame_path_gradient_nonzero", without > 0.0, without, 0.0,
           "min over instances of max |grad| of the same loss without stop_grad_frames"}};
}

// Probe: run the loop from two unrelated initial slot states. With
// decoder_only_rel the keys must be one shared [N,D] set, identical across
// the two runs; without it they are per slot and move with the frames.
std::vector<PropertyResult> decoder_only_checks() {
  auto keys_for = [](bool decoder_only, std::size_t init_seed, std::size_t& rank) {
    ModelConfig cfg = tiny_model_config(Variant::kIsaTSR);
    cfg.variant.decoder_only_rel = decoder_only;
    const auto store = init_params(cfg, 31);
    const auto grid = make_abs_grid<float>(4, 4);
    Rng token_rng(5100);
    Array<float> tokens(Shape{16, cfg.encoder.channels});
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<float>(token_rng.uniform(-1, 1));
    Rng rng(derive_seed(5101, init_seed));
    ParamBinding<float> params(store, false);
    SlotState<float> init;
    Array<float> latents(Shape{cfg.num_slots, cfg.slot_dim});
    for (std::size_t i = 0; i < latents.size(); ++i) latents[i] = static_cast<float>(rng.normal());
    init.latents = Tensor<float>::constant(latents);
    init.frames = init_frames<float>(cfg.frame_init, cfg.num_slots, true, rng, nullptr);
    const auto st = run_isa(Tensor<float>::constant(tokens), grid, init, cfg, AttentionWeights<float>::bind(params));
    rank = st.keys.rank();
    return st.keys.value();
  };
  std::size_t r0 = 0, r1 = 0, r2 = 0, r3 = 0;
  const auto a = keys_for(true, 0, r0);
  const auto b = keys_for(true, 1, r1);
  const bool same = a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
  const auto c = keys_for(false, 0, r2);
  const auto d = keys_for(false, 1, r3);
  double diff = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) diff = std::max(diff, static_cast<double>(std::abs(c[i] - d[i])));
  return {{"ablation/decoder_only_rel_shared_keys", r0 == 2 && r1 == 2 && same, same ? 0.0 : 1.0, 0.0,
           "keys rank " + std::to_string(r0) + ", identical across different slot latents and frames"},
          {"ablation/rel_attention_keys_follow_frames", r2 == 3 && diff > 0.0, diff, 0.0,
           "without decoder_only_rel keys are per slot and change with the frames"}};
}

PropertyResult append_frames_check() {
  ModelConfig cfg;
  cfg.variant.mode = Variant::kIsaTSR;
  cfg.variant.append_frames = true;
  auto with_store = init_params(cfg, 41);
  with_store.get("attn/append/w").fill(0.0f);
  ParamStore<float> plain_store;
  for (const auto& [name, value] : with_store.entries()) {
    if (name.rfind("attn/append/", 0) != 0) plain_store.add(name, value);
  }
  ModelConfig plain_cfg = cfg;
  plain_cfg.variant.append_frames = false;

  std::size_t mismatches = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto scene = generate_scene(DatasetSpec{}, derive_seed(5200, c));
    const auto image = Tensor<float>::constant(scene.image);
    auto run = [&](const ModelConfig& mc, const ParamStore<float>& store) {
      ParamBinding<float> params(store, false);
      Rng rng(derive_seed(5201, c));
      return Model<float>(mc).forward(params, image, rng).reconstruction.value();
    };
    const auto a = run(cfg, with_store);
    const auto b = run(plain_cfg, plain_store);
    if (std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) != 0) ++mismatches;
  }
  return {"ablation/append_frames_zero_projection_bitexact", mismatches == 0, static_cast<double>(mismatches), 0.0,
          "2 scenes, 35x35 ISA-TSR reconstructions compared bit for bit"};
}

}  // namespace

SuiteReport ablation_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r;
  r.suite = "ablation";
  r.properties = stop_grad_checks();
  for (auto& p : decoder_only_checks()) r.properties.push_back(std::move(p));
  r.properties.push_back(append_frames_check());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slotframes::verify

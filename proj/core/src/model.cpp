#include "slotframes/model.hpp"

namespace slotframes {

ParamStore<float> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore<float> store;
  Rng rng(derive_seed(seed, 0x1417));
  register_encoder_params(store, cfg, rng);
  register_attention_params(store, cfg, rng);
  register_decoder_params(store, cfg, rng);
  Array<float> slots(Shape{cfg.num_slots, cfg.slot_dim});
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = static_cast<float>(rng.normal());
  store.add("slots/init", std::move(slots));
  if (cfg.frame_init.mode == FrameInitMode::kLearned) register_frame_params(store, cfg.num_slots, rng);
  return store;
}

template <typename T>
Model<T>::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  grid_ = make_abs_grid<T>(cfg_.token_height(), cfg_.token_width());
}

template <typename T>
SlotState<T> Model<T>::initial_state(ParamBinding<T>& params, Rng& rng) const {
  SlotState<T> s;
  s.latents = params("slots/init");
  s.frames = init_frames(cfg_.frame_init, cfg_.num_slots, uses_rotation(cfg_.variant.mode), rng, &params);
  return s;
}

template <typename T>
ModelOutput<T> Model<T>::forward(ParamBinding<T>& params, const Tensor<T>& image, Rng& rng) const {
  return forward_from(params, image, initial_state(params, rng));
}

template <typename T>
ModelOutput<T> Model<T>::forward_from(ParamBinding<T>& params, const Tensor<T>& image,
                                      const SlotState<T>& init) const {
  const auto tokens = encode(image, cfg_, params);
  const auto weights = AttentionWeights<T>::bind(params);
  ModelOutput<T> out;
  out.slots = run_isa(tokens, grid_, init, cfg_, weights);
  out.decoded = decode(out.slots.latents, out.slots.frames, grid_, cfg_, params);
  out.reconstruction = composite(out.decoded);
  return out;
}

template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& reconstruction, const Tensor<T>& image) {
  return mean(square(sub(reconstruction, image)));
}

template class Model<float>;
template class Model<double>;
template Tensor<float> reconstruction_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> reconstruction_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace slotframes

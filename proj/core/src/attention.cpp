#include "slotframes/attention.hpp"

#include <cmath>

namespace slotframes {

template <typename T>
GruWeights<T> GruWeights<T>::bind(ParamBinding<T>& params, const std::string& prefix) {
  return GruWeights{params(prefix + "/w_input"), params(prefix + "/w_hidden"), params(prefix + "/b_input"),
                    params(prefix + "/b_hidden")};
}

void register_gru(ParamStore<float>& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  store.add(prefix + "/w_input", truncated_normal_fan_in(Shape{in, 3 * hidden}, in, rng));
  store.add(prefix + "/w_hidden", truncated_normal_fan_in(Shape{hidden, 3 * hidden}, hidden, rng));
  store.add(prefix + "/b_input", Array<float>(Shape{3 * hidden}));
  store.add(prefix + "/b_hidden", Array<float>(Shape{3 * hidden}));
}

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& state, const Tensor<T>& update, const GruWeights<T>& w) {
  const std::size_t d = state.dim(1);
  const auto gx = linear(update, w.w_input, w.b_input);
  const auto gh = linear(state, w.w_hidden, w.b_hidden);
  const auto r = sigmoid(add(slice(gx, 1, 0, d), slice(gh, 1, 0, d)));
  const auto z = sigmoid(add(slice(gx, 1, d, d), slice(gh, 1, d, d)));
  const auto n = tanh(add(slice(gx, 1, 2 * d, d), mul(r, slice(gh, 1, 2 * d, d))));
  return add(mul(add_scalar(neg(z), T(1)), n), mul(z, state));
}

template <typename T>
AttentionWeights<T> AttentionWeights<T>::bind(ParamBinding<T>& params) {
  AttentionWeights w;
  w.input_norm = LayerNorm<T>::bind(params, "attn/input_norm");
  w.slot_norm = LayerNorm<T>::bind(params, "attn/slot_norm");
  w.to_k = Dense<T>::bind(params, "attn/to_k");
  w.to_v = Dense<T>::bind(params, "attn/to_v");
  w.to_q = Dense<T>::bind(params, "attn/to_q");
  w.grid = Dense<T>::bind(params, "attn/grid");
  if (params.contains("attn/grid_abs/w")) w.grid_abs = Dense<T>::bind(params, "attn/grid_abs");
  w.f = Mlp<T>::bind(params, "attn/f");
  w.gru = GruWeights<T>::bind(params, "attn/gru");
  w.mlp = Mlp<T>::bind(params, "attn/mlp");
  if (params.contains("attn/append/w")) w.append = Dense<T>::bind(params, "attn/append");
  return w;
}

void register_attention_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng) {
  const std::size_t dt = cfg.encoder.channels;
  const std::size_t da = cfg.attn_dim;
  const std::size_t ds = cfg.slot_dim;
  register_layer_norm(store, "attn/input_norm", dt);
  register_layer_norm(store, "attn/slot_norm", ds);
  register_dense(store, "attn/to_k", dt, da, rng, false);
  register_dense(store, "attn/to_v", dt, da, rng, false);
  register_dense(store, "attn/to_q", ds, da, rng, false);
  register_dense(store, "attn/grid", 2, da, rng);
  if (cfg.variant.mixed_abs_rel) register_dense(store, "attn/grid_abs", 2, da, rng);
  register_mlp(store, "attn/f", {da, cfg.mlp_hidden, da}, rng, true);
  register_gru(store, "attn/gru", da, ds, rng);
  register_mlp(store, "attn/mlp", {ds, cfg.mlp_hidden, ds}, rng, true);
  if (cfg.variant.append_frames) register_dense(store, "attn/append", 8, da, rng, false);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> build_keys_values(const Tensor<T>& inputs, const Tensor<T>& grid_embed,
                                                   const AttentionWeights<T>& w) {
  const auto keys = w.f(add(w.to_k(inputs), grid_embed));
  const auto values = w.f(add(w.to_v(inputs), grid_embed));
  return {keys, values};
}

template <typename T>
Tensor<T> inverted_attention(const Tensor<T>& queries, const Tensor<T>& keys, T scale) {
  const std::size_t k = queries.dim(0);
  const std::size_t d = queries.dim(1);
  Tensor<T> logits;
  if (keys.rank() == 3) {
    const std::size_t n = keys.dim(1);
    logits = reshape(bmm(keys, reshape(queries, Shape{k, d, 1})), Shape{k, n});
  } else {
    logits = matmul(queries, transpose(keys));
  }
  return softmax(mul_scalar(logits, scale), 0);
}

template <typename T>
Tensor<T> slot_update(const Tensor<T>& latents, const Tensor<T>& updates, const SlotFrames<T>& frames,
                      const VariantConfig& cfg, const AttentionWeights<T>& w) {
  Tensor<T> x = updates;
  if (cfg.append_frames) {
    const std::size_t k = latents.dim(0);
    const auto pose = concat<T>({frames.position, frames.scale, reshape(frames.rotation, Shape{k, 4})}, 1);
    x = add(x, w.append(pose));
  }
  const auto h = gru_cell(latents, x, w.gru);
  return add(h, w.mlp(h));
}

template <typename T>
T attention_scale(const ModelConfig& cfg) {
  const double n = cfg.variant.attn_scale == AttnScaleRule::kInvSqrtSlots ? static_cast<double>(cfg.num_slots)
                                                                          : static_cast<double>(cfg.attn_dim);
  return static_cast<T>(1.0 / std::sqrt(n));
}

namespace {

template <typename T>
SlotFrames<T> estimate_frames(const Tensor<T>& attn, const Tensor<T>& attn_inputs, const Tensor<T>& abs,
                              const SlotFrames<T>& prev, const ModelConfig& cfg) {
  const Variant mode = cfg.variant.mode;
  const Tensor<T> src = cfg.variant.stop_grad_frames ? stop_gradient(attn_inputs) : attn_inputs;
  SlotFrames<T> next = prev;
  next.position = estimate_position(src, abs);
  if (uses_rotation(mode)) next.rotation = estimate_rotation(src, abs, next.position);
  if (uses_scale(mode)) {
    next.scale = estimate_scale(src, abs, next.position, uses_rotation(mode) ? &next.rotation : nullptr,
                                static_cast<T>(cfg.grid.epsilon));
  }
  const std::size_t k = attn.dim(0);
  const std::size_t n = attn.dim(1);
  std::vector<bool> alive(k);
  bool all_alive = true;
  for (std::size_t s = 0; s < k; ++s) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += attn.value()[s * n + i];
    alive[s] = mass >= kDeadSlotMass;
    all_alive = all_alive && alive[s];
  }
  if (!all_alive) {
    next.position = select_rows(alive, next.position, prev.position);
    next.scale = select_rows(alive, next.scale, prev.scale);
    next.rotation = select_rows(alive, next.rotation, prev.rotation);
  }
  return next;
}

}  // namespace

template <typename T>
SlotState<T> run_isa(const Tensor<T>& inputs, const AbsGrid<T>& abs, const SlotState<T>& init, const ModelConfig& cfg,
                     const AttentionWeights<T>& w) {
  const VariantConfig& v = cfg.variant;
  const bool invariant = is_invariant(v.mode);
  const bool rel_in_attention = invariant && !v.decoder_only_rel;
  const T scale = attention_scale<T>(cfg);
  const auto abs_t = abs.tensor();

  const auto x = w.input_norm(inputs);
  const auto kx = w.to_k(x);
  const auto vx = w.to_v(x);

  // The grid embedding only changes between iterations when it depends on frames.
  Tensor<T> shared_embed;
  if (!rel_in_attention || v.mixed_abs_rel) {
    shared_embed = rel_in_attention ? w.grid_abs(abs_t) : w.grid(abs_t);
  }

  SlotState<T> state = init;
  for (std::size_t t = 0; t <= v.iterations; ++t) {
    Tensor<T> embed = shared_embed;
    if (rel_in_attention) {
      const auto rel = make_rel_grid(abs_t, state.frames, static_cast<T>(cfg.grid.delta), uses_rotation(v.mode),
                                     uses_scale(v.mode));
      embed = v.mixed_abs_rel ? add(w.grid(rel), shared_embed) : w.grid(rel);
    }
    const auto keys = w.f(add(kx, embed));
    const auto q = w.to_q(w.slot_norm(state.latents));
    const auto attn = inverted_attention(q, keys, scale);
    const auto mass = clamp_min(sum_axis(attn, 1, true), T(1e-8));
    // Renormalize first, then average: the updates use the same weights the
    // frame estimates see.
    const auto attn_inputs = div(attn, mass);
    state.attn = attn;
    state.attn_inputs = attn_inputs;
    state.keys = keys;
    if (invariant) state.frames = estimate_frames(attn, attn_inputs, abs_t, state.frames, cfg);
    if (t == v.iterations) break;

    const auto values = w.f(add(vx, embed));
    Tensor<T> updates;
    if (values.rank() == 3) {
      const std::size_t k = attn.dim(0), n = attn.dim(1);
      updates = reshape(bmm(reshape(attn_inputs, Shape{k, 1, n}), values), Shape{k, values.dim(2)});
    } else {
      updates = matmul(attn_inputs, values);
    }
    state.latents = slot_update(state.latents, updates, state.frames, v, w);
    if (!state.latents.value().all_finite()) {
      throw NumericError("slot attention produced non-finite slots at iteration " + std::to_string(t + 1));
    }
  }
  return state;
}

#define SLOTFRAMES_ATTENTION(T)                                                                                    \
  template struct GruWeights<T>;                                                                                   \
  template struct AttentionWeights<T>;                                                                             \
  template Tensor<T> gru_cell(const Tensor<T>&, const Tensor<T>&, const GruWeights<T>&);                           \
  template std::pair<Tensor<T>, Tensor<T>> build_keys_values(const Tensor<T>&, const Tensor<T>&,                  \
                                                             const AttentionWeights<T>&);                          \
  template Tensor<T> inverted_attention(const Tensor<T>&, const Tensor<T>&, T);                                    \
  template Tensor<T> slot_update(const Tensor<T>&, const Tensor<T>&, const SlotFrames<T>&, const VariantConfig&, \
                                 const AttentionWeights<T>&);                                                      \
  template T attention_scale<T>(const ModelConfig&);                                                               \
  template SlotState<T> run_isa(const Tensor<T>&, const AbsGrid<T>&, const SlotState<T>&, const ModelConfig&,     \
                                const AttentionWeights<T>&);

SLOTFRAMES_ATTENTION(float)
SLOTFRAMES_ATTENTION(double)

#undef SLOTFRAMES_ATTENTION

}  // namespace slotframes

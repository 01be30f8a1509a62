#pragma once

#include "slotframes/frames.hpp"

namespace slotframes {

template <typename T>
struct SlotState {
  Tensor<T> latents;  // [K,D_s]
  SlotFrames<T> frames;
  Tensor<T> attn;         // [K,N] softmax over slots, last iteration
  Tensor<T> attn_inputs;  // [K,N] attn renormalized over tokens
  Tensor<T> keys;         // [K,N,D] per-slot keys, or [N,D] when the grid is shared
};

/// Packed gates in PyTorch order [r, z, n].
template <typename T>
struct GruWeights {
  Tensor<T> w_input;   // [D_in, 3D]
  Tensor<T> w_hidden;  // [D, 3D]
  Tensor<T> b_input;   // [3D]
  Tensor<T> b_hidden;  // [3D]

  static GruWeights bind(ParamBinding<T>& params, const std::string& prefix);
};

void register_gru(ParamStore<float>& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);

/// r = sigmoid(x Wr + h Ur), z = sigmoid(x Wz + h Uz), n = tanh(x Wn + r (h Un));
/// returns (1 - z) n + z h.
template <typename T>
Tensor<T> gru_cell(const Tensor<T>& state, const Tensor<T>& update, const GruWeights<T>& w);

template <typename T>
struct AttentionWeights {
  LayerNorm<T> input_norm;
  LayerNorm<T> slot_norm;
  Dense<T> to_k;
  Dense<T> to_v;
  Dense<T> to_q;
  Dense<T> grid;      // g
  Dense<T> grid_abs;  // g', only with mixed_abs_rel
  Mlp<T> f;
  GruWeights<T> gru;
  Mlp<T> mlp;
  Dense<T> append;  // only with append_frames

  static AttentionWeights bind(ParamBinding<T>& params);
};

void register_attention_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng);

/// keys = f(K(inputs) + grid_embed), values = f(V(inputs) + grid_embed).
/// `inputs` must already be layer-normalized; `grid_embed` is [K,N,D] or [N,D].
template <typename T>
std::pair<Tensor<T>, Tensor<T>> build_keys_values(const Tensor<T>& inputs, const Tensor<T>& grid_embed,
                                                   const AttentionWeights<T>& w);

/// Logits q.k scaled by `scale`, softmax over slots. `keys` is [K,N,D]
/// (one key set per slot) or [N,D] (shared). Returns [K,N].
template <typename T>
Tensor<T> inverted_attention(const Tensor<T>& queries, const Tensor<T>& keys, T scale);

/// GRU on the attention updates then a residual MLP. With append_frames the
/// GRU input is updates + [S_p, S_s, vec(S_r)] W_append.
template <typename T>
Tensor<T> slot_update(const Tensor<T>& latents, const Tensor<T>& updates, const SlotFrames<T>& frames,
                      const VariantConfig& cfg, const AttentionWeights<T>& w);

/// Slots with less total attention than this keep their previous frames.
inline constexpr double kDeadSlotMass = 1e-6;

/// The full attention loop: T update iterations plus one more that only
/// recomputes attention and frames. `inputs` are the raw encoder tokens [N,D_t].
/// Throws NumericError naming the iteration if the slots stop being finite.
template <typename T>
SlotState<T> run_isa(const Tensor<T>& inputs, const AbsGrid<T>& abs, const SlotState<T>& init, const ModelConfig& cfg,
                     const AttentionWeights<T>& w);

template <typename T>
T attention_scale(const ModelConfig& cfg);

}  // namespace slotframes

#include "slotframes/decoder.hpp"

namespace slotframes {

namespace {

std::string deconv_name(std::size_t i) { return "decoder/deconv" + std::to_string(i); }

}  // namespace

void register_decoder_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng) {
  const std::size_t ds = cfg.slot_dim;
  register_dense(store, "decoder/grid", 2, ds, rng);
  if (cfg.variant.mixed_abs_rel) register_dense(store, "decoder/grid_abs", 2, ds, rng);
  const auto& d = cfg.decoder;
  if (d.body == DecoderBody::kMlp) {
    std::vector<std::size_t> widths{ds};
    for (std::size_t i = 0; i + 1 < d.mlp_layers; ++i) widths.push_back(d.hidden);
    widths.push_back(4);
    register_mlp(store, "decoder/mlp", widths, rng, false);
    return;
  }
  std::size_t in = ds;
  for (std::size_t i = 0; i < d.strides.size(); ++i) {
    store.add(deconv_name(i) + "/w",
              truncated_normal_fan_in(Shape{d.kernel, d.kernel, in, d.channels}, d.kernel * d.kernel * in, rng));
    store.add(deconv_name(i) + "/b", Array<float>(Shape{d.channels}));
    in = d.channels;
  }
  register_dense(store, "decoder/out", in, 4, rng);
}

template <typename T>
Tensor<T> spatial_broadcast(const Tensor<T>& latents, std::size_t height, std::size_t width) {
  if (latents.rank() != 2) throw DimensionError("spatial_broadcast expects [K,D], got " + shape_str(latents.shape()));
  const std::size_t k = latents.dim(0), d = latents.dim(1), n = height * width;
  Array<T> out(Shape{k, height, width, d});
  const T* src = latents.value().ptr();
  T* dst = out.ptr();
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t p = 0; p < n; ++p) std::copy(src + s * d, src + (s + 1) * d, dst + (s * n + p) * d);
  }
  return make_result<T>(std::move(out), {latents}, [k, d, n](Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    const T* up = self.grad.ptr();
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t p = 0; p < n; ++p) {
        const T* row = up + (s * n + p) * d;
        for (std::size_t j = 0; j < d; ++j) g[s * d + j] += row[j];
      }
    }
  });
}

template <typename T>
DecodedSlots<T> decode(const Tensor<T>& latents, const SlotFrames<T>& frames, const AbsGrid<T>& grid,
                       const ModelConfig& cfg, ParamBinding<T>& params) {
  const std::size_t k = latents.dim(0), d = latents.dim(1);
  const std::size_t gh = grid.height, gw = grid.width, n = gh * gw;
  const auto abs_t = grid.tensor();
  const Variant mode = cfg.variant.mode;
  const auto h = Dense<T>::bind(params, "decoder/grid");

  Tensor<T> embed;  // [K,N,D] or [N,D]
  if (is_invariant(mode)) {
    embed = h(make_rel_grid(abs_t, frames, static_cast<T>(cfg.grid.delta), uses_rotation(mode), uses_scale(mode)));
    if (cfg.variant.mixed_abs_rel) embed = add(embed, Dense<T>::bind(params, "decoder/grid_abs")(abs_t));
  } else {
    embed = h(abs_t);
  }
  const auto x = add(reshape(spatial_broadcast(latents, gh, gw), Shape{k, n, d}), embed);

  Tensor<T> out;  // [K,H,W,4]
  if (cfg.decoder.body == DecoderBody::kMlp) {
    out = reshape(Mlp<T>::bind(params, "decoder/mlp")(x), Shape{k, gh, gw, 4});
  } else {
    const auto head = Dense<T>::bind(params, "decoder/out");
    std::vector<Tensor<T>> per_slot;
    for (std::size_t s = 0; s < k; ++s) {
      auto y = reshape(slice(x, 0, s, 1), Shape{gh, gw, d});
      for (std::size_t i = 0; i < cfg.decoder.strides.size(); ++i) {
        y = conv_transpose2d_same(y, params(deconv_name(i) + "/w"), cfg.decoder.strides[i]);
        y = relu(add(y, params(deconv_name(i) + "/b")));
      }
      per_slot.push_back(reshape(head(y), Shape{1, y.dim(0), y.dim(1), 4}));
    }
    out = concat(per_slot, 0);
  }
  DecodedSlots<T> dec;
  dec.rgb = slice(out, 3, 0, 3);
  dec.alpha_logits = slice(out, 3, 3, 1);
  dec.alpha = softmax(dec.alpha_logits, 0);
  return dec;
}

template <typename T>
Tensor<T> composite(const DecodedSlots<T>& d) {
  return sum_axis(mul(d.alpha, d.rgb), 0);
}

#define SLOTFRAMES_DECODER(T)                                                                                   \
  template Tensor<T> spatial_broadcast(const Tensor<T>&, std::size_t, std::size_t);                             \
  template DecodedSlots<T> decode(const Tensor<T>&, const SlotFrames<T>&, const AbsGrid<T>&, const ModelConfig&, \
                                  ParamBinding<T>&);                                                            \
  template Tensor<T> composite(const DecodedSlots<T>&);

SLOTFRAMES_DECODER(float)
SLOTFRAMES_DECODER(double)

#undef SLOTFRAMES_DECODER

}  // namespace slotframes

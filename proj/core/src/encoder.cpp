#include "slotframes/encoder.hpp"

namespace slotframes {

namespace {

std::string conv_name(std::size_t i) { return "encoder/conv" + std::to_string(i); }

}  // namespace

void register_encoder_params(ParamStore<float>& store, const ModelConfig& cfg, Rng& rng) {
  const auto& e = cfg.encoder;
  std::size_t in = 3;
  for (std::size_t i = 0; i < e.strides.size(); ++i) {
    store.add(conv_name(i) + "/w", truncated_normal_fan_in(Shape{e.kernel, e.kernel, in, e.channels},
                                                           e.kernel * e.kernel * in, rng));
    store.add(conv_name(i) + "/b", Array<float>(Shape{e.channels}));
    in = e.channels;
  }
}

template <typename T>
Tensor<T> encode(const Tensor<T>& image, const ModelConfig& cfg, ParamBinding<T>& params) {
  if (image.rank() != 3 || image.dim(0) != cfg.image_height || image.dim(1) != cfg.image_width ||
      image.dim(2) != 3) {
    throw ConfigError("encoder expects a " + std::to_string(cfg.image_height) + "x" +
                      std::to_string(cfg.image_width) + "x3 image, got " + shape_str(image.shape()));
  }
  Tensor<T> h = image;
  for (std::size_t i = 0; i < cfg.encoder.strides.size(); ++i) {
    h = conv2d_same(h, params(conv_name(i) + "/w"), cfg.encoder.strides[i], cfg.encoder.padding);
    h = relu(add(h, params(conv_name(i) + "/b")));
  }
  return reshape(h, Shape{h.dim(0) * h.dim(1), h.dim(2)});
}

template Tensor<float> encode(const Tensor<float>&, const ModelConfig&, ParamBinding<float>&);
template Tensor<double> encode(const Tensor<double>&, const ModelConfig&, ParamBinding<double>&);

}  // namespace slotframes

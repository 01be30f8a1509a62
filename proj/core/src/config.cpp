#include "slotframes/config.hpp"

#include "slotframes/array.hpp"

namespace slotframes {

std::size_t ModelConfig::token_height() const {
  std::size_t h = image_height;
  for (auto s : encoder.strides) h = (h + s - 1) / s;
  return h;
}

std::size_t ModelConfig::token_width() const {
  std::size_t w = image_width;
  for (auto s : encoder.strides) w = (w + s - 1) / s;
  return w;
}

void ModelConfig::validate() const {
  if (num_slots < 1) throw ConfigError("num_slots must be >= 1");
  if (slot_dim < 1 || attn_dim < 1 || mlp_hidden < 1) throw ConfigError("model widths must be positive");
  if (variant.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(grid.delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(grid.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (encoder.kernel % 2 == 0) throw ConfigError("encoder kernel size must be odd");
  if (encoder.strides.empty()) throw ConfigError("encoder needs at least one layer");
  for (auto s : encoder.strides) {
    if (s != 1 && s != 2) throw ConfigError("encoder strides must be 1 or 2");
  }
  if (token_height() < 2 || token_width() < 2) throw ConfigError("token grid must be at least 2x2");
  if (decoder.body == DecoderBody::kMlp) {
    if (token_height() != image_height || token_width() != image_width) {
      throw ConfigError("the MLP decoder needs a stride-1 encoder (token grid equal to image size)");
    }
    if (decoder.mlp_layers < 2) throw ConfigError("decoder MLP needs at least 2 layers");
  } else {
    std::size_t up = 1;
    for (auto s : decoder.strides) {
      if (s != 1 && s != 2) throw ConfigError("decoder strides must be 1 or 2");
      up *= s;
    }
    if (decoder.kernel % 2 == 0) throw ConfigError("decoder kernel size must be odd");
    if (token_height() * up != image_height || token_width() * up != image_width) {
      throw ConfigError("transpose-conv decoder strides do not map the token grid back to the image size");
    }
  }
  if (variant.mixed_abs_rel && !is_invariant(variant.mode)) {
    throw ConfigError("mixed_abs_rel needs an invariant (ISA) variant");
  }
  if (variant.decoder_only_rel && !is_invariant(variant.mode)) {
    throw ConfigError("decoder_only_rel needs an invariant (ISA) variant");
  }
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSA:
      return "SA";
    case Variant::kIsaT:
      return "ISA-T";
    case Variant::kIsaTS:
      return "ISA-TS";
    case Variant::kIsaTSR:
      return "ISA-TSR";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "SA") return Variant::kSA;
  if (s == "ISA-T") return Variant::kIsaT;
  if (s == "ISA-TS") return Variant::kIsaTS;
  if (s == "ISA-TSR") return Variant::kIsaTSR;
  throw ConfigError("unknown variant '" + s + "' (expected SA, ISA-T, ISA-TS or ISA-TSR)");
}

}  // namespace slotframes

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slotframes/ops.hpp"

namespace slotframes {

enum class Variant { kSA, kIsaT, kIsaTS, kIsaTSR };

enum class AttnScaleRule {
  kInvSqrtSlots,  // 1/sqrt(K), as in the ISA pseudocode
  kInvSqrtDim,    // 1/sqrt(D), conventional dot-product attention
};

struct VariantConfig {
  Variant mode = Variant::kIsaTSR;
  bool append_frames = false;     // feed S_p, S_s, S_r into the recurrent update
  bool decoder_only_rel = false;  // abs grid in attention, rel grid in the decoder only
  bool stop_grad_frames = false;  // frames are computed from a gradient-stopped mask
  bool mixed_abs_rel = false;     // g(rel_grid) + g'(abs_grid)
  std::size_t iterations = 3;
  AttnScaleRule attn_scale = AttnScaleRule::kInvSqrtSlots;
};

inline bool is_invariant(Variant v) { return v != Variant::kSA; }
inline bool uses_scale(Variant v) { return v == Variant::kIsaTS || v == Variant::kIsaTSR; }
inline bool uses_rotation(Variant v) { return v == Variant::kIsaTSR; }

struct GridParams {
  double delta = 5.0;    // rel_grid divisor multiplier on S_s
  double epsilon = 1e-8; // weight offset in the scale estimate
};

enum class FrameInitMode { kLearned, kSampled };

struct FrameInitSpec {
  FrameInitMode mode = FrameInitMode::kSampled;
  bool identity_rotation = false;
};

struct EncoderConfig {
  std::size_t channels = 64;
  std::size_t kernel = 5;
  std::vector<std::size_t> strides{1, 1, 1, 1};
  Padding padding = Padding::kZero;
};

enum class DecoderBody { kMlp, kTransposeConv };

struct DecoderConfig {
  DecoderBody body = DecoderBody::kMlp;
  std::size_t hidden = 256;      // MLP body width
  std::size_t mlp_layers = 5;    // dense layers including the output layer
  std::size_t channels = 64;     // transpose-conv body width
  std::size_t kernel = 5;
  std::vector<std::size_t> strides{2, 2, 1, 1, 1};
};

struct ModelConfig {
  std::size_t image_height = 35;
  std::size_t image_width = 35;
  std::size_t num_slots = 4;
  std::size_t slot_dim = 64;
  std::size_t attn_dim = 64;     // keys / values / queries width
  std::size_t mlp_hidden = 128;  // f and the residual slot MLP
  VariantConfig variant;
  GridParams grid;
  FrameInitSpec frame_init;
  EncoderConfig encoder;
  DecoderConfig decoder;

  std::size_t token_height() const;
  std::size_t token_width() const;
  void validate() const;
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

}  // namespace slotframes

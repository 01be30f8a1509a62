#pragma once

#include <array>

#include "png_io.hpp"
#include "slotframes/decoder.hpp"

namespace slotframes::cli {

/// [H,W,3] floats in [0,1] (clamped) to 8-bit, each pixel blown up to a
/// `scale` x `scale` block.
RgbImage to_rgb(const Array<float>& image, std::size_t scale);

/// Slot k of alphas [K,H,W,1] as a gray image, 255 * alpha rounded.
RgbImage mask_image(const Array<float>& alpha, std::size_t k, std::size_t scale);

/// Per-pixel sum_k alpha_k * color_k with a fixed slot palette.
RgbImage soft_segmentation(const Array<float>& alpha, std::size_t scale);

std::array<std::uint8_t, 3> slot_color(std::size_t k);

/// A slot frame in image pixel coordinates of an upscaled picture.
struct FrameGlyph {
  double cx = 0, cy = 0;  // S_p
  double angle = 0;       // atan2 of the first column of S_r, radians
  std::array<double, 2> radius{};  // S_s along each frame axis, in pixels
  std::array<std::array<double, 2>, 2> axis_tip{};  // arrow end points
};

/// Grid coordinates span [-1, 1] over token centers of a `grid_h` x
/// `grid_w` token grid; the picture is `width` x `height` pixels.
FrameGlyph frame_glyph(const SlotFrames<float>& frames, std::size_t k, std::size_t grid_h, std::size_t grid_w,
                       std::size_t width, std::size_t height);

/// Point at S_p, ellipse with semi-axes S_s along the frame axes, and one
/// arrow per axis.
void draw_glyph(RgbImage& img, const FrameGlyph& g, std::array<std::uint8_t, 3> color);

}  // namespace slotframes::cli

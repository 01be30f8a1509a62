#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace slotframes::cli {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void put(RgbImage& img, double x, double y, std::array<std::uint8_t, 3> c) {
  const long ix = std::lround(std::floor(x)), iy = std::lround(std::floor(y));
  if (ix < 0 || iy < 0 || ix >= static_cast<long>(img.width) || iy >= static_cast<long>(img.height)) return;
  std::copy(c.begin(), c.end(), img.at(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy)));
}

void line(RgbImage& img, double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const std::size_t n = static_cast<std::size_t>(std::ceil(len * 4)) + 1;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    put(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), c);
  }
}

}  // namespace

std::array<std::uint8_t, 3> slot_color(std::size_t k) {
  static const std::array<std::array<std::uint8_t, 3>, 8> palette{{{230, 25, 75},
                                                                   {60, 180, 75},
                                                                   {0, 130, 200},
                                                                   {255, 225, 25},
                                                                   {145, 30, 180},
                                                                   {70, 240, 240},
                                                                   {245, 130, 48},
                                                                   {240, 50, 230}}};
  return palette[k % palette.size()];
}

RgbImage to_rgb(const Array<float>& image, std::size_t scale) {
  const std::size_t h = image.dim(0), w = image.dim(1);
  RgbImage out(w * scale, h * scale);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const float* src = image.ptr() + ((y / scale) * w + x / scale) * 3;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y)[c] = to_byte(src[c]);
    }
  }
  return out;
}

RgbImage mask_image(const Array<float>& alpha, std::size_t k, std::size_t scale) {
  const std::size_t h = alpha.dim(1), w = alpha.dim(2);
  RgbImage out(w * scale, h * scale);
  const float* src = alpha.ptr() + k * h * w;
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::uint8_t v = to_byte(src[(y / scale) * w + x / scale]);
      std::fill(out.at(x, y), out.at(x, y) + 3, v);
    }
  }
  return out;
}

RgbImage soft_segmentation(const Array<float>& alpha, std::size_t scale) {
  const std::size_t k = alpha.dim(0), h = alpha.dim(1), w = alpha.dim(2);
  RgbImage out(w * scale, h * scale);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t p = (y / scale) * w + x / scale;
      std::array<double, 3> acc{};
      for (std::size_t s = 0; s < k; ++s) {
        const auto col = slot_color(s);
        for (std::size_t c = 0; c < 3; ++c) acc[c] += alpha[s * h * w + p] * col[c] / 255.0;
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y)[c] = to_byte(acc[c]);
    }
  }
  return out;
}

FrameGlyph frame_glyph(const SlotFrames<float>& frames, std::size_t k, std::size_t grid_h, std::size_t grid_w,
                       std::size_t width, std::size_t height) {
  // Grid coordinate -1 is the center of the first token, +1 of the last.
  const double bx = 0.5 * static_cast<double>(grid_w - 1) * static_cast<double>(width) / static_cast<double>(grid_w);
  const double by = 0.5 * static_cast<double>(grid_h - 1) * static_cast<double>(height) / static_cast<double>(grid_h);
  const double ax = bx + 0.5 * static_cast<double>(width) / static_cast<double>(grid_w);
  const double ay = by + 0.5 * static_cast<double>(height) / static_cast<double>(grid_h);
  auto px = [&](double gx) { return ax + bx * gx; };
  auto py = [&](double gy) { return ay + by * gy; };

  const auto& pos = frames.position.value();
  const auto& sc = frames.scale.value();
  const auto& rot = frames.rotation.value();
  const double r00 = rot[k * 4], r10 = rot[k * 4 + 2], r01 = rot[k * 4 + 1], r11 = rot[k * 4 + 3];
  FrameGlyph g;
  g.cx = px(pos[k * 2]);
  g.cy = py(pos[k * 2 + 1]);
  g.angle = std::atan2(r10, r00);
  g.radius = {sc[k * 2] * bx, sc[k * 2 + 1] * by};
  const std::array<std::array<double, 2>, 2> axes{{{r00, r10}, {r01, r11}}};
  for (std::size_t i = 0; i < 2; ++i) {
    const double len = std::max(2.0 * sc[k * 2 + i], 0.15);
    g.axis_tip[i] = {px(pos[k * 2] + len * axes[i][0]), py(pos[k * 2 + 1] + len * axes[i][1])};
  }
  return g;
}

void draw_glyph(RgbImage& img, const FrameGlyph& g, std::array<std::uint8_t, 3> color) {
  const std::array<std::uint8_t, 3> white{255, 255, 255};
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if (dx * dx + dy * dy <= 4) put(img, g.cx + dx, g.cy + dy, white);
    }
  }
  const double c = std::cos(g.angle), s = std::sin(g.angle);
  const std::size_t n = 720;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    const double u = g.radius[0] * std::cos(t), v = g.radius[1] * std::sin(t);
    put(img, g.cx + c * u - s * v, g.cy + s * u + c * v, color);
  }
  for (const auto& tip : g.axis_tip) {
    line(img, g.cx, g.cy, tip[0], tip[1], white);
    const double a = std::atan2(tip[1] - g.cy, tip[0] - g.cx);
    const double head = std::clamp(0.25 * std::hypot(tip[0] - g.cx, tip[1] - g.cy), 3.0, 8.0);
    for (double side : {-1.0, 1.0}) {
      const double b = a + std::numbers::pi - side * std::numbers::pi / 6;
      line(img, tip[0], tip[1], tip[0] + head * std::cos(b), tip[1] + head * std::sin(b), white);
    }
  }
}

}  // namespace slotframes::cli

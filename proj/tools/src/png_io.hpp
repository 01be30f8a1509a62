#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace slotframes::cli {

/// 8-bit RGB, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }
};

void write_png(const std::filesystem::path& file, const RgbImage& img);
RgbImage read_png(const std::filesystem::path& file);

}  // namespace slotframes::cli

#pragma once

#include <filesystem>

#include "slotframes/scene_synth.hpp"

namespace slotframes {

// Split file layout (all integers little-endian):
//   bytes 0..3    magic "SFDS"
//   bytes 4..7    uint32 format version (1)
//   bytes 8..15   uint64 header length L
//   next L bytes  UTF-8 JSON header: spec, split, count, height, width,
//                 per-record object metadata
//   count blocks of H*W*3 float32 images (row-major, channels last)
//   count blocks of H*W uint8 label maps
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_split(const std::filesystem::path& file, const DatasetSpec& spec, Split split,
                 const std::vector<SceneSample>& scenes);

struct SplitFile {
  DatasetSpec spec;
  Split split = Split::kTrain;
  std::vector<SceneSample> scenes;
};

SplitFile read_split(const std::filesystem::path& file);

std::filesystem::path split_path(const std::filesystem::path& dir, Split split);

}  // namespace slotframes

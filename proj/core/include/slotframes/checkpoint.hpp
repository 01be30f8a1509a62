#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "slotframes/optim.hpp"

namespace slotframes {

// Checkpoint file layout (integers little-endian):
//   bytes 0..3    magic "SFCK"
//   bytes 4..7    uint32 format version (1)
//   bytes 8..15   uint64 manifest length L
//   next L bytes  JSON manifest: step, seed, config_hash, config, adam_t,
//                 rng, and a tensor table of {name, role, shape, dtype,
//                 offset, count}; offsets are bytes from the start of the
//                 blob section
//   blob section  raw float32 values, tensors in table order
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_json;
  ParamStore<float> params;
  AdamState<float> adam;
};

/// Writes to a temporary sibling then renames, so a crash never leaves a
/// truncated checkpoint behind.
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// FNV-1a 64 over the file bytes.
std::uint64_t file_hash(const std::filesystem::path& file);

}  // namespace slotframes

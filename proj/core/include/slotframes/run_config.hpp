#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "slotframes/config.hpp"
#include "slotframes/optim.hpp"
#include "slotframes/scene_synth.hpp"

namespace slotframes {

/// Everything that determines a run. The model's image size always equals
/// the dataset canvas.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  DatasetSpec data;
  TrainConfig train;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "run";

  void validate() const;
};

/// Parses the JSON schema documented in the README. Missing keys keep their
/// defaults; unknown keys and malformed values throw ConfigError. Relative
/// paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

/// Canonical JSON (every field, fixed key order, paths as given).
std::string run_config_to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical JSON with paths and thread count removed, so
/// moving a run or changing --threads keeps the hash.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace slotframes

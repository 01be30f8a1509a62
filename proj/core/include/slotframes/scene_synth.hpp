#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slotframes/array.hpp"
#include "slotframes/rng.hpp"

namespace slotframes {

enum class PositionBias { kNone, kLeftHalf };

std::string to_string(PositionBias b);
PositionBias position_bias_from_string(const std::string& s);

struct DatasetSpec {
  std::size_t height = 35;
  std::size_t width = 35;
  std::size_t objects_per_scene = 3;
  std::size_t block = 7;  // pixels per tetromino cell
  std::size_t n_train = 1024;
  std::size_t n_val = 320;
  PositionBias position_bias = PositionBias::kNone;
  std::uint64_t seed = 0;
  bool augment_translation = false;

  void validate() const;
};

/// A tetromino as a cell mask, row-major in a rows x cols box.
struct Tetromino {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  bool at(std::size_t r, std::size_t c) const { return cells[r * cols + c] != 0; }
};

/// The 19 distinct orientations of the 7 one-sided tetrominoes.
const std::vector<Tetromino>& tetromino_shapes();

/// Saturated RGB colors; scenes draw from these without replacement.
const std::vector<std::array<float, 3>>& color_palette();

struct ObjectMeta {
  std::size_t shape_id = 0;
  std::size_t color_id = 0;
  std::size_t top = 0;   // pixel row of the bounding box
  std::size_t left = 0;  // pixel column of the bounding box
  double center_x = 0;   // pixel centroid, continuous coordinates (pixel i spans [i, i+1))
  double center_y = 0;
};

struct SceneSample {
  Array<float> image;                // [H,W,3] in [0,1]
  std::vector<std::uint8_t> labels;  // H*W, 0 = background, 1..M objects
  std::vector<ObjectMeta> objects;
};

inline constexpr std::size_t kMaxPlacementTries = 1000;

/// Deterministic in (spec, stream seed). Objects are placed one at a time by
/// rejection sampling; if one cannot be placed the scene restarts from a
/// derived sub-seed.
SceneSample generate_scene(const DatasetSpec& spec, std::uint64_t stream_seed);

enum class Split { kTrain, kValIid, kValOod };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Seed of scene `index` in `split`. Splits use disjoint stream ranges.
std::uint64_t scene_seed(const DatasetSpec& spec, Split split, std::size_t index);

/// Spec a split is generated with: val_ood drops the position bias.
DatasetSpec split_spec(const DatasetSpec& spec, Split split);
std::size_t split_size(const DatasetSpec& spec, Split split);

std::vector<SceneSample> generate_split(const DatasetSpec& spec, Split split);

struct Splits {
  std::vector<SceneSample> train;
  std::vector<SceneSample> val_iid;
  std::vector<SceneSample> val_ood;
};

Splits make_splits(const DatasetSpec& spec);

/// Integer shift keeping every object fully in frame, applied to image and
/// labels alike. Returns the sample unchanged if no shift other than zero fits.
SceneSample augment_translate(const SceneSample& sample, Rng& rng);

/// Shift by (dx, dy) pixels; throws if an object would leave the canvas.
SceneSample translate_scene(const SceneSample& sample, long dx, long dy);

}  // namespace slotframes

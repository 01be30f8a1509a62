#include "slotframes/scene_synth.hpp"

#include <algorithm>
#include <numeric>

namespace slotframes {

std::string to_string(PositionBias b) { return b == PositionBias::kNone ? "none" : "left_half"; }

PositionBias position_bias_from_string(const std::string& s) {
  if (s == "none") return PositionBias::kNone;
  if (s == "left_half") return PositionBias::kLeftHalf;
  throw ConfigError("unknown position_bias '" + s + "' (expected none or left_half)");
}

void DatasetSpec::validate() const {
  if (height < 2 || width < 2) throw ConfigError("canvas must be at least 2x2");
  if (block < 1) throw ConfigError("block size must be >= 1");
  if (4 * block > std::min(height, width)) throw ConfigError("a 4-cell tetromino does not fit the canvas");
  if (objects_per_scene > color_palette().size()) {
    throw ConfigError("objects_per_scene exceeds the palette size " + std::to_string(color_palette().size()));
  }
  if (objects_per_scene > 255) throw ConfigError("objects_per_scene must fit uint8 labels");
  if (position_bias == PositionBias::kLeftHalf && augment_translation) {
    throw ConfigError("translation augmentation must be off with the left_half position bias");
  }
}

namespace {

using Cells = std::vector<std::pair<int, int>>;  // (row, col)

Tetromino to_mask(Cells cells) {
  int r0 = 1 << 20, c0 = 1 << 20, r1 = -(1 << 20), c1 = -(1 << 20);
  for (auto [r, c] : cells) {
    r0 = std::min(r0, r);
    c0 = std::min(c0, c);
    r1 = std::max(r1, r);
    c1 = std::max(c1, c);
  }
  Tetromino t;
  t.rows = static_cast<std::size_t>(r1 - r0 + 1);
  t.cols = static_cast<std::size_t>(c1 - c0 + 1);
  t.cells.assign(t.rows * t.cols, 0);
  for (auto [r, c] : cells) t.cells[static_cast<std::size_t>(r - r0) * t.cols + static_cast<std::size_t>(c - c0)] = 1;
  return t;
}

std::vector<Tetromino> build_shapes() {
  const std::vector<Cells> pieces = {
      {{0, 0}, {0, 1}, {0, 2}, {0, 3}},  // I
      {{0, 0}, {0, 1}, {1, 0}, {1, 1}},  // O
      {{0, 0}, {0, 1}, {0, 2}, {1, 1}},  // T
      {{0, 1}, {0, 2}, {1, 0}, {1, 1}},  // S
      {{0, 0}, {0, 1}, {1, 1}, {1, 2}},  // Z
      {{0, 0}, {1, 0}, {1, 1}, {1, 2}},  // J
      {{0, 2}, {1, 0}, {1, 1}, {1, 2}},  // L
  };
  std::vector<Tetromino> out;
  for (const auto& piece : pieces) {
    Cells cells = piece;
    for (int rot = 0; rot < 4; ++rot) {
      const Tetromino t = to_mask(cells);
      const bool seen = std::any_of(out.begin(), out.end(), [&](const Tetromino& o) {
        return o.rows == t.rows && o.cols == t.cols && o.cells == t.cells;
      });
      if (!seen) out.push_back(t);
      for (auto& [r, c] : cells) {
        const int nr = c;
        const int nc = -r;
        r = nr;
        c = nc;
      }
    }
  }
  return out;
}

// Returns false if the object could not be placed.
bool place_object(const DatasetSpec& spec, Rng& rng, std::size_t id, std::size_t color_id, SceneSample& s) {
  const auto& shapes = tetromino_shapes();
  const std::size_t b = spec.block;
  for (std::size_t attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
    const std::size_t shape_id = rng.below(shapes.size());
    const Tetromino& t = shapes[shape_id];
    const std::size_t h = t.rows * b, w = t.cols * b;
    const std::size_t top = rng.below(spec.height - h + 1);
    const std::size_t left = rng.below(spec.width - w + 1);
    double cx = 0, cy = 0;
    std::size_t count = 0;
    bool free = true;
    for (std::size_t r = 0; r < t.rows && free; ++r) {
      for (std::size_t c = 0; c < t.cols && free; ++c) {
        if (!t.at(r, c)) continue;
        for (std::size_t i = 0; i < b && free; ++i) {
          for (std::size_t j = 0; j < b; ++j) {
            const std::size_t y = top + r * b + i, x = left + c * b + j;
            if (s.labels[y * spec.width + x] != 0) {
              free = false;
              break;
            }
            cx += static_cast<double>(x) + 0.5;
            cy += static_cast<double>(y) + 0.5;
            ++count;
          }
        }
      }
    }
    if (!free) continue;
    cx /= static_cast<double>(count);
    cy /= static_cast<double>(count);
    if (spec.position_bias == PositionBias::kLeftHalf && !(cx < static_cast<double>(spec.width) / 2.0)) continue;
    const auto& color = color_palette()[color_id];
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        if (!t.at(r, c)) continue;
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < b; ++j) {
            const std::size_t p = (top + r * b + i) * spec.width + left + c * b + j;
            s.labels[p] = static_cast<std::uint8_t>(id);
            for (std::size_t ch = 0; ch < 3; ++ch) s.image[p * 3 + ch] = color[ch];
          }
        }
      }
    }
    s.objects.push_back(ObjectMeta{shape_id, color_id, top, left, cx, cy});
    return true;
  }
  return false;
}

}  // namespace

const std::vector<Tetromino>& tetromino_shapes() {
  static const std::vector<Tetromino> shapes = build_shapes();
  return shapes;
}

const std::vector<std::array<float, 3>>& color_palette() {
  static const std::vector<std::array<float, 3>> palette = {
      {1.0f, 0.0f, 0.0f}, {0.0f, 1.0f, 0.0f}, {0.0f, 0.0f, 1.0f},
      {1.0f, 1.0f, 0.0f}, {1.0f, 0.0f, 1.0f}, {0.0f, 1.0f, 1.0f},
  };
  return palette;
}

SceneSample generate_scene(const DatasetSpec& spec, std::uint64_t stream_seed) {
  spec.validate();
  for (std::uint64_t sub = 0;; ++sub) {
    Rng rng(derive_seed(stream_seed, sub));
    SceneSample s;
    s.image = Array<float>(Shape{spec.height, spec.width, 3});
    s.labels.assign(spec.height * spec.width, 0);
    std::vector<std::size_t> colors(color_palette().size());
    std::iota(colors.begin(), colors.end(), 0);
    // Partial Fisher-Yates: the first objects_per_scene entries are the draw.
    for (std::size_t i = 0; i < spec.objects_per_scene; ++i) {
      std::swap(colors[i], colors[i + rng.below(colors.size() - i)]);
    }
    bool ok = true;
    for (std::size_t o = 0; o < spec.objects_per_scene && ok; ++o) ok = place_object(spec, rng, o + 1, colors[o], s);
    if (ok) return s;
  }
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValIid:
      return "val_iid";
    default:
      return "val_ood";
  }
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val_iid") return Split::kValIid;
  if (s == "val_ood") return Split::kValOod;
  throw ConfigError("unknown split '" + s + "' (expected train, val_iid or val_ood)");
}

std::uint64_t scene_seed(const DatasetSpec& spec, Split split, std::size_t index) {
  const std::uint64_t base = static_cast<std::uint64_t>(split) << 40;
  return derive_seed(spec.seed, base + index);
}

DatasetSpec split_spec(const DatasetSpec& spec, Split split) {
  DatasetSpec s = spec;
  if (split == Split::kValOod) s.position_bias = PositionBias::kNone;
  if (split != Split::kTrain) s.augment_translation = false;
  return s;
}

std::size_t split_size(const DatasetSpec& spec, Split split) {
  return split == Split::kTrain ? spec.n_train : spec.n_val;
}

std::vector<SceneSample> generate_split(const DatasetSpec& spec, Split split) {
  const DatasetSpec s = split_spec(spec, split);
  std::vector<SceneSample> out;
  out.reserve(split_size(spec, split));
  for (std::size_t i = 0; i < split_size(spec, split); ++i) out.push_back(generate_scene(s, scene_seed(spec, split, i)));
  return out;
}

Splits make_splits(const DatasetSpec& spec) {
  return Splits{generate_split(spec, Split::kTrain), generate_split(spec, Split::kValIid),
                generate_split(spec, Split::kValOod)};
}

SceneSample translate_scene(const SceneSample& sample, long dx, long dy) {
  const long h = static_cast<long>(sample.image.dim(0));
  const long w = static_cast<long>(sample.image.dim(1));
  SceneSample out;
  out.image = Array<float>(sample.image.shape());
  out.labels.assign(sample.labels.size(), 0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const std::size_t src = static_cast<std::size_t>(y * w + x);
      if (sample.labels[src] == 0) continue;
      const long ty = y + dy, tx = x + dx;
      if (ty < 0 || ty >= h || tx < 0 || tx >= w) throw ConfigError("translation moves an object off the canvas");
      const std::size_t dst = static_cast<std::size_t>(ty * w + tx);
      out.labels[dst] = sample.labels[src];
      for (std::size_t c = 0; c < 3; ++c) out.image[dst * 3 + c] = sample.image[src * 3 + c];
    }
  }
  out.objects = sample.objects;
  for (auto& o : out.objects) {
    o.top = static_cast<std::size_t>(static_cast<long>(o.top) + dy);
    o.left = static_cast<std::size_t>(static_cast<long>(o.left) + dx);
    o.center_x += static_cast<double>(dx);
    o.center_y += static_cast<double>(dy);
  }
  return out;
}

SceneSample augment_translate(const SceneSample& sample, Rng& rng) {
  const long h = static_cast<long>(sample.image.dim(0));
  const long w = static_cast<long>(sample.image.dim(1));
  long x0 = w, x1 = -1, y0 = h, y1 = -1;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      if (sample.labels[static_cast<std::size_t>(y * w + x)] == 0) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return sample;
  const long nx = (w - 1 - x1) + x0 + 1;  // choices for dx in [-x0, w-1-x1]
  const long ny = (h - 1 - y1) + y0 + 1;
  if (nx == 1 && ny == 1) return sample;
  const long dx = static_cast<long>(rng.below(static_cast<std::uint64_t>(nx))) - x0;
  const long dy = static_cast<long>(rng.below(static_cast<std::uint64_t>(ny))) - y0;
  return translate_scene(sample, dx, dy);
}

}  // namespace slotframes

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "slotframes/dataset_io.hpp"
#include "slotframes/metrics.hpp"
#include "slotframes/oracles.hpp"
#include "slotframes/scene_synth.hpp"
#include "test_util.hpp"

using namespace slotframes;

namespace {

DatasetSpec small_spec() {
  DatasetSpec spec;
  spec.n_train = 64;
  spec.n_val = 16;
  spec.seed = 11;
  return spec;
}

std::size_t object_count(const SceneSample& s) {
  std::set<int> ids;
  for (auto l : s.labels) {
    if (l != 0) ids.insert(l);
  }
  return ids.size();
}

}  // namespace

TEST(TetrominoShapes, NineteenOrientationsOfFourCells) {
  const auto& shapes = tetromino_shapes();
  ASSERT_EQ(shapes.size(), 19u);
  for (const auto& t : shapes) EXPECT_EQ(std::count(t.cells.begin(), t.cells.end(), 1), 4);
}

TEST(GenerateScene, NoObjectsGivesBlackImage) {
  auto spec = small_spec();
  spec.objects_per_scene = 0;
  const auto s = generate_scene(spec, 5);
  EXPECT_TRUE(std::all_of(s.image.ptr(), s.image.ptr() + s.image.size(), [](float v) { return v == 0.0f; }));
  EXPECT_TRUE(std::all_of(s.labels.begin(), s.labels.end(), [](auto l) { return l == 0; }));
}

TEST(GenerateScene, SameSeedIsBitIdentical) {
  const auto spec = small_spec();
  const auto a = generate_scene(spec, 42);
  const auto b = generate_scene(spec, 42);
  EXPECT_EQ(max_abs_diff(a.image, b.image), 0.0);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(GenerateScene, ObjectsDoNotOverlapAndKeepTheirColor) {
  const auto spec = small_spec();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = generate_scene(spec, seed);
    ASSERT_EQ(s.objects.size(), 3u);
    EXPECT_EQ(object_count(s), 3u);
    std::vector<std::size_t> pixels(4, 0);
    for (std::size_t p = 0; p < s.labels.size(); ++p) {
      const int l = s.labels[p];
      ++pixels[l];
      if (l == 0) continue;
      const auto& color = color_palette()[s.objects[l - 1].color_id];
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(s.image[p * 3 + c], color[c]);
    }
    for (std::size_t l = 1; l <= 3; ++l) EXPECT_EQ(pixels[l], 4 * spec.block * spec.block);
  }
}

TEST(GenerateScene, LeftBiasKeepsCentersLeft) {
  auto spec = small_spec();
  spec.position_bias = PositionBias::kLeftHalf;
  double max_x = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    for (const auto& o : generate_scene(spec, seed).objects) max_x = std::max(max_x, o.center_x);
  }
  EXPECT_LT(max_x, spec.width / 2.0);
}

TEST(MakeSplits, SizesAndDisjointSeeds) {
  const auto spec = small_spec();
  const auto splits = make_splits(spec);
  EXPECT_EQ(splits.train.size(), 64u);
  EXPECT_EQ(splits.val_iid.size(), 16u);
  EXPECT_EQ(splits.val_ood.size(), 16u);
  std::set<std::uint64_t> seeds;
  for (Split sp : {Split::kTrain, Split::kValIid, Split::kValOod}) {
    for (std::size_t i = 0; i < split_size(spec, sp); ++i) seeds.insert(scene_seed(spec, sp, i));
  }
  EXPECT_EQ(seeds.size(), 96u);
}

TEST(MakeSplits, OodSplitDropsTheBias) {
  auto spec = small_spec();
  spec.position_bias = PositionBias::kLeftHalf;
  EXPECT_EQ(split_spec(spec, Split::kValOod).position_bias, PositionBias::kNone);
  EXPECT_EQ(split_spec(spec, Split::kValIid).position_bias, PositionBias::kLeftHalf);
}

TEST(AugmentTranslate, ZeroShiftIsIdentity) {
  const auto s = generate_scene(small_spec(), 3);
  const auto t = translate_scene(s, 0, 0);
  EXPECT_EQ(max_abs_diff(s.image, t.image), 0.0);
  EXPECT_EQ(s.labels, t.labels);
}

TEST(AugmentTranslate, ShiftMovesPixelsRight) {
  auto spec = small_spec();
  spec.position_bias = PositionBias::kLeftHalf;
  const auto s = generate_scene(spec, 4);
  const auto t = translate_scene(s, 3, 0);
  const std::size_t w = spec.width;
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x + 3 < w; ++x) EXPECT_EQ(t.labels[y * w + x + 3], s.labels[y * w + x]);
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) EXPECT_DOUBLE_EQ(t.objects[i].center_x, s.objects[i].center_x + 3);
}

TEST(AugmentTranslate, OffCanvasShiftThrows) {
  const auto s = generate_scene(small_spec(), 5);
  EXPECT_THROW(translate_scene(s, 40, 0), ConfigError);
}

TEST(AugmentTranslate, PreservesObjectCount) {
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_scene(small_spec(), seed);
    EXPECT_EQ(object_count(augment_translate(s, rng)), object_count(s));
  }
}

TEST(DatasetIo, RoundTripIsExact) {
  const auto spec = small_spec();
  const auto scenes = generate_split(spec, Split::kValIid);
  const auto dir = std::filesystem::temp_directory_path() / "slotframes_dataset_io_test";
  std::filesystem::create_directories(dir);
  const auto file = split_path(dir, Split::kValIid);
  write_split(file, spec, Split::kValIid, scenes);
  const auto back = read_split(file);
  EXPECT_EQ(back.split, Split::kValIid);
  EXPECT_EQ(back.spec.seed, spec.seed);
  ASSERT_EQ(back.scenes.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EXPECT_EQ(max_abs_diff(back.scenes[i].image, scenes[i].image), 0.0);
    EXPECT_EQ(back.scenes[i].labels, scenes[i].labels);
    EXPECT_EQ(back.scenes[i].objects.size(), scenes[i].objects.size());
  }
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, RejectsGarbage) {
  const auto file = std::filesystem::temp_directory_path() / "slotframes_garbage.bin";
  {
    std::ofstream f(file, std::ios::binary);
    f << "not a dataset";
  }
  EXPECT_ANY_THROW(read_split(file));
  std::filesystem::remove(file);
}

TEST(Ari, IdenticalPartitionsScoreOne) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2, 2};
  EXPECT_DOUBLE_EQ(ari(a, a, false), 1.0);
}

TEST(Ari, RelabelingScoresOne) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> b{5, 5, 3, 3, 9, 9, 9};
  EXPECT_NEAR(ari(a, b, false), 1.0, 1e-15);
}

TEST(Ari, KnownNegativeExample) {
  const std::vector<int> pred{0, 0, 1, 1};
  const std::vector<int> truth{0, 1, 0, 1};
  EXPECT_NEAR(ari(pred, truth, false), -0.5, 1e-15);
}

TEST(Ari, MatchesPairCountingOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(11);
    std::vector<int> p(n), t(n);
    for (auto& v : p) v = static_cast<int>(rng.below(4));
    for (auto& v : t) v = static_cast<int>(rng.below(4));
    EXPECT_NEAR(ari(p, t, false), oracle::pair_counting_ari(p, t), 1e-12);
  }
}

TEST(Ari, ForegroundOnlyDropsBackground) {
  const std::vector<int> pred{3, 0, 0, 1, 1};
  const std::vector<int> truth{0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(ari(pred, truth, true), 1.0);
  const std::vector<int> bg{0, 0};
  EXPECT_TRUE(std::isnan(ari(std::vector<int>{1, 2}, bg, true)));
}

TEST(PredictedLabels, OneHotAlphaPicksTheSlot) {
  DecodedSlots<double> d;
  d.alpha = tensor({2, 1, 3, 1}, {1, 0, 1, 0, 1, 0});
  EXPECT_EQ(predicted_labels(d), (std::vector<int>{0, 1, 0}));
}

TEST(PredictedLabels, UniformAlphaGoesToFirstSlot) {
  DecodedSlots<double> d;
  d.alpha = tensor({3, 1, 2, 1}, std::vector<double>(6, 1.0 / 3.0));
  EXPECT_EQ(predicted_labels(d), (std::vector<int>{0, 0}));
}

TEST(PredictedLabels, DominantSlotWins) {
  Array<float> alpha(Shape{3, 2, 2, 1}, {0.1f, 0.2f, 0.7f, 0.3f, 0.6f, 0.1f, 0.2f, 0.3f, 0.3f, 0.7f, 0.1f, 0.4f});
  EXPECT_EQ(argmax_slots(alpha), (std::vector<int>{1, 2, 0, 2}));
}

TEST(Mse, IdenticalIsZero) {
  const auto a = random_array<float>({4, 4, 3}, 8, 0, 1);
  EXPECT_EQ(squared_error(a, a), 0.0);
}

TEST(Mse, OnePixelOffByOne) {
  Array<float> a(Shape{4, 4, 3});
  auto b = a;
  b[5] = 1.0f;
  std::vector<Array<float>> p{a}, t{b};
  EXPECT_DOUBLE_EQ(mse(p, t), 1.0);
}

TEST(Mse, MatchesLoopOracle) {
  std::vector<Array<float>> p, t;
  for (std::uint64_t i = 0; i < 3; ++i) {
    p.push_back(random_array<float>({5, 5, 3}, 10 + i, 0, 1));
    t.push_back(random_array<float>({5, 5, 3}, 20 + i, 0, 1));
  }
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 75; ++j) {
      const double d = double(p[i][j]) - t[i][j];
      want += d * d / 3.0;
    }
  }
  EXPECT_NEAR(mse(p, t), want, 1e-9);
}

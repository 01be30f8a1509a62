#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "commands.hpp"
#include "render.hpp"
#include "slotframes/dataset_io.hpp"
#include "slotframes/trainer.hpp"

using namespace slotframes;
using namespace slotframes::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// A fresh scratch directory holding a small run config.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("slotframes_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_config(4, 2);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_config(std::size_t slots, std::size_t steps) {
    json cfg{{"seed", 2},
             {"model",
              {{"num_slots", slots},
               {"slot_dim", 8},
               {"attn_dim", 8},
               {"mlp_hidden", 8},
               {"encoder", {{"channels", 8}, {"kernel", 3}, {"strides", {1}}}},
               {"decoder", {{"hidden", 8}, {"mlp_layers", 3}}}}},
             {"data", {{"height", 10}, {"width", 10}, {"block", 2}, {"objects_per_scene", 2}, {"n_train", 64}, {"n_val", 4}}},
             {"train", {{"total_steps", steps}, {"warmup_steps", 1}, {"batch_size", 2}, {"eval_every", 2}, {"checkpoint_every", 2}}},
             {"paths", {{"data_dir", "data"}, {"out_dir", "run"}}}};
    std::ofstream(dir_ / "config.json") << cfg.dump(2);
  }

  Options opts() const {
    Options o;
    o.config = dir_ / "config.json";
    return o;
  }

  int run(const std::string& cmd, const Options& o, std::string* out = nullptr) {
    std::ostringstream os, log;
    const int code = run_command(cmd, o, os, log);
    if (out) *out = os.str();
    return code;
  }

  fs::path dir_;
};

}  // namespace

TEST(Render, OneHotAlphasGiveBinaryMasks) {
  Array<float> alpha(Shape{2, 2, 3, 1}, {1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0});
  for (std::size_t k = 0; k < 2; ++k) {
    const auto img = mask_image(alpha, k, 4);
    ASSERT_EQ(img.width, 12u);
    ASSERT_EQ(img.height, 8u);
    for (auto v : img.pixels) EXPECT_TRUE(v == 0 || v == 255);
    EXPECT_EQ(img.at(0, 0)[0], k == 0 ? 255 : 0);
  }
}

TEST(Render, ArrowAngleIsAtan2OfFirstRotationColumn) {
  for (double deg : {-40.0, -10.0, 0.0, 25.0, 45.0}) {
    const double t = deg * std::numbers::pi / 180.0;
    SlotFrames<float> f;
    f.position = Tensor<float>::constant(Array<float>(Shape{1, 2}, {0.2f, -0.3f}));
    f.scale = Tensor<float>::constant(Array<float>(Shape{1, 2}, {0.2f, 0.1f}));
    f.rotation = Tensor<float>::constant(Array<float>(
        Shape{1, 2, 2}, {float(std::cos(t)), float(-std::sin(t)), float(std::sin(t)), float(std::cos(t))}));
    const auto g = frame_glyph(f, 0, 10, 10, 80, 80);
    EXPECT_NEAR(g.angle, std::atan2(double(f.rotation.value()[2]), double(f.rotation.value()[0])), 1e-12);
    // The first arrow leaves the center along the same direction on screen.
    EXPECT_NEAR(std::atan2(g.axis_tip[0][1] - g.cy, g.axis_tip[0][0] - g.cx), g.angle, 1e-6);
  }
}

TEST(Render, FrameCenterMapsToTokenPixel) {
  SlotFrames<float> f;
  f.position = Tensor<float>::constant(Array<float>(Shape{1, 2}, {-1.0f, 1.0f}));
  f.scale = Tensor<float>::constant(Array<float>(Shape{1, 2}, {0.1f, 0.1f}));
  f.rotation = Tensor<float>::constant(Array<float>(Shape{1, 2, 2}, {1, 0, 0, 1}));
  const auto g = frame_glyph(f, 0, 5, 5, 40, 40);
  EXPECT_DOUBLE_EQ(g.cx, 4.0);   // center of the first token column
  EXPECT_DOUBLE_EQ(g.cy, 36.0);  // center of the last token row
}

TEST(Png, RoundTrip) {
  RgbImage img(3, 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 13);
  const auto file = fs::temp_directory_path() / "slotframes_png_roundtrip.png";
  write_png(file, img);
  const auto back = read_png(file);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
  fs::remove(file);
}

TEST_F(CliTest, GenDataWritesRequestedRecordsAndIsByteStable) {
  ASSERT_EQ(run("gen-data", opts()), kExitOk);
  const auto train = read_split(split_path(dir_ / "data", Split::kTrain));
  EXPECT_EQ(train.scenes.size(), 64u);
  const std::string first = slurp(split_path(dir_ / "data", Split::kTrain));
  EXPECT_EQ(run("gen-data", opts()), kExitUsage);  // non-empty target without --force
  auto o = opts();
  o.force = true;
  ASSERT_EQ(run("gen-data", o), kExitOk);
  EXPECT_EQ(slurp(split_path(dir_ / "data", Split::kTrain)), first);
}

TEST_F(CliTest, MissingConfigIsUsageError) {
  auto o = opts();
  o.config = dir_ / "nope.json";
  EXPECT_EQ(run("gen-data", o), kExitUsage);
  EXPECT_EQ(run("train", o), kExitUsage);
}

TEST_F(CliTest, MalformedConfigIsUsageError) {
  std::ofstream(dir_ / "config.json") << R"({"model": {"num_slotz": 3}})";
  EXPECT_EQ(run("train", opts()), kExitUsage);
}

TEST_F(CliTest, UntrainedEvalIsFiniteAndRepeatable) {
  std::string a, b;
  ASSERT_EQ(run("eval", opts(), &a), kExitOk);
  ASSERT_EQ(run("eval", opts(), &b), kExitOk);
  EXPECT_EQ(a, b);
  const auto j = json::parse(a);
  EXPECT_TRUE(j["fg_ari"].is_number());
  EXPECT_TRUE(j["mse"].is_number());
  EXPECT_LT(j["fg_ari"].get<double>(), 0.9);
}

TEST_F(CliTest, EvalReportReferencesTrainedCheckpointHash) {
  std::string train_out, eval_out;
  ASSERT_EQ(run("train", opts(), &train_out), kExitOk);
  const auto tr = json::parse(train_out);
  auto o = opts();
  o.checkpoints = {dir_ / "run" / "checkpoint.sfck"};
  ASSERT_EQ(run("eval", o, &eval_out), kExitOk);
  const auto ev = json::parse(eval_out);
  EXPECT_EQ(ev["checkpoint_hash"], tr["checkpoint_hash"]);
  EXPECT_EQ(ev["runs"][0]["step"], 2);
  std::string again;
  ASSERT_EQ(run("eval", o, &again), kExitOk);
  EXPECT_EQ(again, eval_out);
}

TEST_F(CliTest, TrainRefusesExistingRunWithoutForce) {
  ASSERT_EQ(run("train", opts()), kExitOk);
  EXPECT_EQ(run("train", opts()), kExitUsage);
  auto o = opts();
  o.force = true;
  EXPECT_EQ(run("train", o), kExitOk);
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  write_config(3, 4);
  ASSERT_EQ(run("train", opts()), kExitOk);
  const std::string full = slurp(dir_ / "run" / "checkpoint.sfck");
  const std::string history = slurp(dir_ / "run" / "history.jsonl");

  // An interrupted run: two of four steps, in the same output directory.
  fs::remove_all(dir_ / "run");
  const auto cfg = load_run_config(dir_ / "config.json");
  const auto splits = make_splits(cfg.data);
  TrainOptions first;
  first.stop_at = 2;
  train(cfg, TrainData{splits.train, splits.val_iid, splits.val_ood}, first);
  fs::copy_file(dir_ / "run" / "checkpoint.sfck", dir_ / "half.sfck");

  auto o = opts();
  o.checkpoints = {dir_ / "half.sfck"};
  ASSERT_EQ(run("train", o), kExitOk);
  EXPECT_EQ(slurp(dir_ / "run" / "checkpoint.sfck"), full);
  EXPECT_EQ(slurp(dir_ / "run" / "history.jsonl"), history);
}

TEST_F(CliTest, VisualizeWritesMasksAndComposites) {
  auto o = opts();
  o.out = dir_ / "vis";
  o.scale = 2;
  ASSERT_EQ(run("visualize", o), kExitOk);
  std::size_t masks = 0, composites = 0;
  for (const auto& e : fs::directory_iterator(o.out)) {
    const auto name = e.path().filename().string();
    if (name.rfind("mask_", 0) == 0) ++masks;
    if (name == "input.png" || name == "reconstruction.png" || name == "segmentation.png") ++composites;
  }
  EXPECT_EQ(masks, 4u);
  EXPECT_EQ(composites, 3u);
  const auto frames = json::parse(slurp(o.out / "frames.json"));
  ASSERT_EQ(frames["frames"].size(), 4u);
  for (const auto& f : frames["frames"]) {
    const double angle = std::atan2(f["rotation"][1][0].get<double>(), f["rotation"][0][0].get<double>());
    EXPECT_NEAR(f["arrow_angle_deg"].get<double>(), angle * 180.0 / std::numbers::pi, 1e-9);
  }
  EXPECT_EQ(read_png(o.out / "mask_0.png").width, 20u);
  o.index = 99;
  o.force = true;
  EXPECT_EQ(run("visualize", o), kExitUsage);
}

TEST_F(CliTest, VerifyListsPropertiesWithTolerances) {
  auto o = opts();
  o.suite = "metrics";
  std::string out;
  ASSERT_EQ(run("verify", o, &out), kExitOk);
  const auto j = json::parse(out);
  EXPECT_TRUE(j["passed"].get<bool>());
  ASSERT_FALSE(j["suites"].empty());
  for (const auto& suite : j["suites"]) {
    for (const auto& p : suite["properties"]) {
      EXPECT_TRUE(p.contains("measured"));
      EXPECT_TRUE(p.contains("tolerance"));
      EXPECT_TRUE(p["passed"].get<bool>());
    }
  }
  o.suite = "nonsense";
  EXPECT_EQ(run("verify", o), kExitUsage);
}

TEST(CliBinary, ExitCodes) {
  const std::string bin = SLOTFRAMES_CLI_PATH;
  auto code = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(code(""), kExitUsage);
  EXPECT_EQ(code("frobnicate"), kExitUsage);
  EXPECT_EQ(code("gen-data"), kExitUsage);
  EXPECT_EQ(code("gen-data --config /no/such/config.json"), kExitUsage);
  EXPECT_EQ(code("train --config /no/such/config.json --threads abc"), kExitUsage);
  EXPECT_EQ(code("verify metrics"), kExitOk);
  EXPECT_EQ(code("--help"), kExitOk);
}

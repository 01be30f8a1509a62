#include <filesystem>
#include <fstream>
#include <sstream>

#include "slotframes/trainer.hpp"
#include "test_util.hpp"

using namespace slotframes;
namespace fs = std::filesystem;

namespace {

TrainConfig schedule(double peak, std::size_t warmup, std::size_t total) {
  TrainConfig cfg;
  cfg.lr_peak = peak;
  cfg.warmup_steps = warmup;
  cfg.total_steps = total;
  return cfg;
}

RunConfig tiny_run(const fs::path& out) {
  RunConfig cfg;
  cfg.seed = 3;
  cfg.data.height = cfg.model.image_height = 10;
  cfg.data.width = cfg.model.image_width = 10;
  cfg.data.block = 2;
  cfg.data.objects_per_scene = 2;
  cfg.data.n_train = 6;
  cfg.data.n_val = 2;
  cfg.model.num_slots = 3;
  cfg.model.slot_dim = cfg.model.attn_dim = cfg.model.mlp_hidden = 8;
  cfg.model.encoder.channels = 8;
  cfg.model.encoder.kernel = 3;
  cfg.model.encoder.strides = {1};
  cfg.model.decoder.hidden = 8;
  cfg.model.decoder.mlp_layers = 3;
  cfg.train.total_steps = 4;
  cfg.train.warmup_steps = 1;
  cfg.train.batch_size = 2;
  cfg.train.eval_every = 2;
  cfg.train.checkpoint_every = 2;
  cfg.out_dir = out;
  return cfg;
}

TrainData tiny_data(const RunConfig& cfg) {
  auto s = make_splits(cfg.data);
  return {s.train, s.val_iid, s.val_ood};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(LrSchedule, WarmupThenCosine) {
  const auto cfg = schedule(4e-4, 500, 5000);
  EXPECT_EQ(lr_schedule(0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(lr_schedule(250, cfg), 2e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(500, cfg), 4e-4);
  EXPECT_NEAR(lr_schedule(2750, cfg), 2e-4, 1e-15);
  EXPECT_NEAR(lr_schedule(5000, cfg), 0.0, 1e-18);
}

TEST(TrainConfigValidate, RejectsWarmupPastTotal) {
  EXPECT_THROW(schedule(1e-3, 10, 10).validate(), ConfigError);
}

TEST(Adam, ZeroGradientsOnlyDecayMoments) {
  ParamStore<double> params;
  params.add("w", Array<double>(Shape{2}, {1.5, -2.0}));
  auto state = make_adam_state(params);
  state.m[0] = Array<double>(Shape{2}, {0.2, -0.4});
  state.v[0] = Array<double>(Shape{2}, {0.0, 0.0});
  TrainConfig cfg;
  std::vector<Array<double>> grads{Array<double>(Shape{2})};
  const auto before = params.get("w");
  adam_step(params, grads, state, 0.0, cfg);
  EXPECT_EQ(max_abs_diff(params.get("w"), before), 0.0);
  EXPECT_NEAR(state.m[0][0], 0.18, 1e-15);
  EXPECT_NEAR(state.m[0][1], -0.36, 1e-15);
}

TEST(Adam, FirstStepMovesBySignTimesLr) {
  ParamStore<double> params;
  params.add("w", Array<double>(Shape{3}, {0.0, 1.0, -1.0}));
  auto state = make_adam_state(params);
  TrainConfig cfg;
  std::vector<Array<double>> grads{Array<double>(Shape{3}, {3.0, -0.01, 200.0})};
  adam_step(params, grads, state, 1e-3, cfg);
  expect_values(params.get("w"), {-1e-3, 1.0 + 1e-3, -1.0 - 1e-3}, 1e-9);
}

TEST(Adam, ThreeStepsMatchScalarOracle) {
  ParamStore<double> params;
  params.add("w", Array<double>(Shape{1}, {0.7}));
  auto state = make_adam_state(params);
  TrainConfig cfg;
  const double g[3] = {0.5, -1.25, 0.1};
  const double lr[3] = {1e-2, 2e-2, 5e-3};
  double w = 0.7, m = 0, v = 0;
  for (int t = 0; t < 3; ++t) {
    std::vector<Array<double>> grads{Array<double>(Shape{1}, {g[t]})};
    adam_step(params, grads, state, lr[t], cfg);
    m = 0.9 * m + 0.1 * g[t];
    v = 0.999 * v + 0.001 * g[t] * g[t];
    const double mh = m / (1 - std::pow(0.9, t + 1));
    const double vh = v / (1 - std::pow(0.999, t + 1));
    w -= lr[t] * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(params.get("w")[0], w, 1e-10) << "step " << t + 1;
  }
  EXPECT_EQ(state.t, 3u);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  ParamStore<double> params;
  params.add("encoder/conv0/w", Array<double>(Shape{1}, {0.0}));
  auto state = make_adam_state(params);
  std::vector<Array<double>> grads{Array<double>(Shape{1}, {NAN})};
  try {
    adam_step(params, grads, state, 1e-3, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder/conv0/w"), std::string::npos);
  }
}

TEST(ClipGlobalNorm, ScalesToMaxNorm) {
  std::vector<Array<double>> grads{Array<double>(Shape{2}, {3.0, 0.0}), Array<double>(Shape{1}, {4.0})};
  EXPECT_DOUBLE_EQ(clip_global_norm(grads, 1.0), 5.0);
  EXPECT_NEAR(grads[0][0], 0.6, 1e-15);
  EXPECT_NEAR(grads[1][0], 0.8, 1e-15);
}

TEST(RunConfigParse, DefaultsAndOverrides) {
  const auto cfg = parse_run_config(R"({"seed": 4, "model": {"variant": "ISA-T", "num_slots": 5}})");
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.model.variant.mode, Variant::kIsaT);
  EXPECT_EQ(cfg.model.num_slots, 5u);
  EXPECT_EQ(cfg.model.slot_dim, 64u);
  EXPECT_EQ(cfg.train.total_steps, 5000u);
}

TEST(RunConfigParse, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"modle": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"num_slots": -1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"variant": "isa_x"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
}

TEST(RunConfigParse, CanonicalJsonRoundTrips) {
  auto cfg = tiny_run("somewhere");
  cfg.model.variant.mode = Variant::kIsaTS;
  const auto text = run_config_to_json(cfg);
  EXPECT_EQ(run_config_to_json(parse_run_config(text)), text);
}

TEST(RunConfigParse, HashIgnoresPathsAndThreads) {
  auto a = tiny_run("x");
  auto b = tiny_run("y");
  b.train.threads = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 99;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = fs::temp_directory_path() / "slotframes_ckpt_test";
  fs::create_directories(dir);
  const auto cfg = tiny_run(dir);
  Checkpoint ck;
  ck.step = 7;
  ck.seed = 3;
  ck.config_hash = config_hash(cfg);
  ck.config_json = run_config_to_json(cfg);
  ck.params = init_params(cfg.model, 3);
  ck.adam = make_adam_state(ck.params);
  ck.adam.t = 7;
  ck.adam.m[0][0] = 0.25f;
  save_checkpoint(dir / "a.sfck", ck);
  const auto back = load_checkpoint(dir / "a.sfck");
  EXPECT_EQ(back.step, 7u);
  EXPECT_EQ(back.config_hash, ck.config_hash);
  EXPECT_EQ(back.adam.t, 7u);
  EXPECT_EQ(back.adam.m[0][0], 0.25f);
  ASSERT_EQ(back.params.entries().size(), ck.params.entries().size());
  for (std::size_t i = 0; i < ck.params.entries().size(); ++i) {
    EXPECT_EQ(back.params.entries()[i].first, ck.params.entries()[i].first);
    EXPECT_EQ(max_abs_diff(back.params.entries()[i].second, ck.params.entries()[i].second), 0.0);
  }
  save_checkpoint(dir / "b.sfck", back);
  EXPECT_EQ(file_hash(dir / "a.sfck"), file_hash(dir / "b.sfck"));
  fs::remove_all(dir);
}

TEST(Train, ZeroStepsIsEvalOnly) {
  const auto dir = fs::temp_directory_path() / "slotframes_train_zero";
  fs::remove_all(dir);
  auto cfg = tiny_run(dir);
  cfg.train.total_steps = 0;
  cfg.train.warmup_steps = 0;
  const auto result = train(cfg, tiny_data(cfg));
  EXPECT_TRUE(result.history.steps.empty());
  ASSERT_EQ(result.history.evals.size(), 1u);
  for (const auto& r : result.history.evals[0].reports) EXPECT_TRUE(std::isfinite(r.mse));
  EXPECT_EQ(result.checkpoint.step, 0u);
  fs::remove_all(dir);
}

TEST(Train, TwoRunsAreIdentical) {
  const auto dir = fs::temp_directory_path() / "slotframes_train_twice";
  fs::remove_all(dir);
  const auto cfg = tiny_run(dir);
  const auto data = tiny_data(cfg);
  const auto a = train(cfg, data);
  const auto bytes_a = slurp(a.checkpoint_path);
  fs::remove_all(dir);
  const auto b = train(cfg, data);
  EXPECT_EQ(slurp(b.checkpoint_path), bytes_a);
  ASSERT_EQ(a.history.steps.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.history.steps[i].loss, b.history.steps[i].loss);
  fs::remove_all(dir);
}

TEST(Train, ThreadCountDoesNotChangeResults) {
  const auto dir = fs::temp_directory_path() / "slotframes_train_threads";
  fs::remove_all(dir);
  auto cfg = tiny_run(dir);
  const auto data = tiny_data(cfg);
  TrainOptions opts;
  opts.write_files = false;
  const auto a = train(cfg, data, opts);
  cfg.train.threads = 3;
  const auto b = train(cfg, data, opts);
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) EXPECT_EQ(a.history.steps[i].loss, b.history.steps[i].loss);
  fs::remove_all(dir);
}

TEST(BatchIndices, DeterministicAndInRange) {
  const auto a = batch_indices(10, 4, 7, 3);
  EXPECT_EQ(a, batch_indices(10, 4, 7, 3));
  EXPECT_EQ(a.size(), 4u);
  for (auto i : a) EXPECT_LT(i, 10u);
}

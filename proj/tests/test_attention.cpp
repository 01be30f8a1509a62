#include <cstring>

#include "slotframes/model.hpp"
#include "test_util.hpp"

using namespace slotframes;

namespace {

ModelConfig small_config(Variant v) {
  ModelConfig cfg;
  cfg.image_height = 6;
  cfg.image_width = 6;
  cfg.num_slots = 3;
  cfg.slot_dim = 8;
  cfg.attn_dim = 8;
  cfg.mlp_hidden = 12;
  cfg.variant.mode = v;
  cfg.encoder.channels = 5;
  cfg.encoder.kernel = 3;
  cfg.encoder.strides = {1};
  cfg.decoder.hidden = 12;
  cfg.decoder.mlp_layers = 3;
  return cfg;
}

ParamStore<double> attention_store(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore<float> store;
  Rng rng(seed);
  register_attention_params(store, cfg, rng);
  return store.cast<double>();
}

void zero_prefix(ParamStore<double>& store, const std::string& prefix) {
  for (auto& [name, value] : store.entries()) {
    if (name.rfind(prefix, 0) == 0) value.fill(0.0);
  }
}

template <typename T>
bool bitwise_equal(const Array<T>& a, const Array<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(T)) == 0;
}

SlotState<double> random_init(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  SlotState<double> s;
  s.latents = Tensor<double>::constant(random_array({cfg.num_slots, cfg.slot_dim}, seed + 1));
  s.frames = init_frames<double>(cfg.frame_init, cfg.num_slots, uses_rotation(cfg.variant.mode), rng, nullptr);
  return s;
}

}  // namespace

TEST(BuildKeysValues, SharedGridGivesTokenByWidthKeys) {
  ModelConfig cfg;
  cfg.variant.mode = Variant::kSA;
  auto store = attention_store(cfg, 1);
  ParamBinding<double> params(store);
  const auto w = AttentionWeights<double>::bind(params);
  const auto grid = make_abs_grid<double>(4, 4);
  const auto inputs = Tensor<double>::constant(random_array({16, 64}, 2));
  const auto [keys, values] = build_keys_values(inputs, encode_grid(grid.tensor(), w.grid), w);
  EXPECT_EQ(keys.shape(), (Shape{16, 64}));
  EXPECT_EQ(values.shape(), (Shape{16, 64}));
}

TEST(BuildKeysValues, RelativeGridGivesPerSlotKeys) {
  ModelConfig cfg;
  auto store = attention_store(cfg, 3);
  ParamBinding<double> params(store);
  const auto w = AttentionWeights<double>::bind(params);
  const auto grid = make_abs_grid<double>(4, 4);
  Rng rng(4);
  const auto frames = init_frames<double>(cfg.frame_init, 4, true, rng, nullptr);
  const auto rel = make_rel_grid(grid.tensor(), frames, 5.0, true);
  const auto [keys, values] = build_keys_values(Tensor<double>::constant(random_array({16, 64}, 5)), encode_grid(rel, w.grid), w);
  EXPECT_EQ(keys.shape(), (Shape{4, 16, 64}));
}

TEST(BuildKeysValues, ZeroGridProjectionMakesSlotsAgree) {
  ModelConfig cfg;
  auto store = attention_store(cfg, 6);
  store.get("attn/grid/w").fill(0.0);
  ParamBinding<double> params(store);
  const auto w = AttentionWeights<double>::bind(params);
  const auto grid = make_abs_grid<double>(4, 4);
  Rng rng(7);
  const auto frames = init_frames<double>(cfg.frame_init, 4, true, rng, nullptr);
  const auto [keys, values] = build_keys_values(Tensor<double>::constant(random_array({16, 64}, 8)),
                                                encode_grid(make_rel_grid(grid.tensor(), frames, 5.0, true), w.grid), w);
  const auto& kv = keys.value();
  const std::size_t per = 16 * 64;
  for (std::size_t s = 1; s < 4; ++s) EXPECT_EQ(std::memcmp(kv.ptr(), kv.ptr() + s * per, per * sizeof(double)), 0);
}

TEST(InvertedAttention, IdenticalQueriesGiveUniformColumns) {
  const auto q = tensor({3, 2}, {0.3, -1, 0.3, -1, 0.3, -1});
  const auto keys = Tensor<double>::constant(random_array({5, 2}, 9));
  const auto a = inverted_attention(q, keys, 1.0).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], 1.0 / 3.0, 1e-15);
}

TEST(InvertedAttention, AlignedQueryTakesItsToken) {
  // Keys are the standard basis; slot 0 points at token 0 and the scale is
  // large, so column 0 is one-hot on slot 0.
  const auto keys = tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto q = tensor({2, 3}, {1, 0, 0, 0, 0, 0});
  const double scale = 50.0;
  const auto a = inverted_attention(q, keys, scale).value();
  const double expected = 1.0 / (1.0 + std::exp(-scale));
  EXPECT_NEAR(a[0], expected, 1e-15);
  EXPECT_NEAR(a[3], 1.0 - expected, 1e-15);
  EXPECT_GT(a[0], 1.0 - 1e-12);
}

TEST(InvertedAttention, ColumnsSumToOne) {
  const auto a = inverted_attention(Tensor<double>::constant(random_array({4, 6}, 10, -3, 3)),
                                    Tensor<double>::constant(random_array({4, 9, 6}, 11, -3, 3)), 0.5)
                     .value();
  for (std::size_t n = 0; n < 9; ++n) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += a[k * 9 + n];
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(SlotUpdate, ZeroWeightsHalveSlots) {
  ModelConfig cfg = small_config(Variant::kIsaTSR);
  auto store = attention_store(cfg, 12);
  zero_prefix(store, "attn/gru/");
  zero_prefix(store, "attn/mlp/dense");
  ParamBinding<double> params(store);
  const auto w = AttentionWeights<double>::bind(params);
  const auto init = random_init(cfg, 13);
  const auto out = slot_update(init.latents, Tensor<double>::constant(random_array({3, 8}, 14)), init.frames,
                               cfg.variant, w)
                       .value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out[i], 0.5 * init.latents.value()[i]);
}

TEST(SlotUpdate, MatchesStepByStepOracle) {
  ModelConfig cfg = small_config(Variant::kIsaTSR);
  cfg.variant.append_frames = true;
  const auto store = attention_store(cfg, 15);
  ParamBinding<double> params(store);
  const auto w = AttentionWeights<double>::bind(params);
  const auto init = random_init(cfg, 16);
  const auto updates = random_array({3, 8}, 17);
  const auto out = slot_update(init.latents, Tensor<double>::constant(updates), init.frames, cfg.variant, w).value();

  const std::size_t k = 3, d = 8, hid = 12;
  auto p = [&](const std::string& n) { return store.get(n); };
  const auto& h0 = init.latents.value();
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<double> pose;
    for (std::size_t e = 0; e < 2; ++e) pose.push_back(init.frames.position.value()[s * 2 + e]);
    for (std::size_t e = 0; e < 2; ++e) pose.push_back(init.frames.scale.value()[s * 2 + e]);
    for (std::size_t e = 0; e < 4; ++e) pose.push_back(init.frames.rotation.value()[s * 4 + e]);
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = updates[s * d + j];
      for (std::size_t i = 0; i < 8; ++i) x[j] += pose[i] * p("attn/append/w")[i * d + j];
    }
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j) {
      auto gate = [&](std::size_t g, bool hidden) {
        const auto& wm = p(hidden ? "attn/gru/w_hidden" : "attn/gru/w_input");
        double v = p(hidden ? "attn/gru/b_hidden" : "attn/gru/b_input")[g * d + j];
        for (std::size_t i = 0; i < d; ++i) v += (hidden ? h0[s * d + i] : x[i]) * wm[i * 3 * d + g * d + j];
        return v;
      };
      const double r = 1 / (1 + std::exp(-(gate(0, false) + gate(0, true))));
      const double z = 1 / (1 + std::exp(-(gate(1, false) + gate(1, true))));
      const double n = std::tanh(gate(2, false) + r * gate(2, true));
      h[j] = (1 - z) * n + z * h0[s * d + j];
    }
    double mu = 0, var = 0;
    for (double v : h) mu += v / d;
    for (double v : h) var += (v - mu) * (v - mu) / d;
    std::vector<double> ln(d), mid(hid);
    for (std::size_t j = 0; j < d; ++j) {
      ln[j] = (h[j] - mu) / std::sqrt(var + 1e-6) * p("attn/mlp/norm/gain")[j] + p("attn/mlp/norm/bias")[j];
    }
    for (std::size_t j = 0; j < hid; ++j) {
      double v = p("attn/mlp/dense0/b")[j];
      for (std::size_t i = 0; i < d; ++i) v += ln[i] * p("attn/mlp/dense0/w")[i * hid + j];
      mid[j] = std::max(v, 0.0);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = p("attn/mlp/dense1/b")[j];
      for (std::size_t i = 0; i < hid; ++i) v += mid[i] * p("attn/mlp/dense1/w")[i * d + j];
      EXPECT_NEAR(out[s * d + j], h[j] + v, 1e-6);
    }
  }
}

TEST(RunIsa, SlotAttentionNeverTouchesFrames) {
  ModelConfig cfg = small_config(Variant::kSA);
  const auto store = attention_store(cfg, 18);
  ParamBinding<double> params(store);
  const auto init = random_init(cfg, 19);
  const auto st = run_isa(Tensor<double>::constant(random_array({36, 5}, 20)), make_abs_grid<double>(6, 6), init, cfg,
                          AttentionWeights<double>::bind(params));
  EXPECT_EQ(st.keys.rank(), 2u);
  EXPECT_EQ(st.frames.position.node(), init.frames.position.node());
  EXPECT_EQ(st.frames.scale.node(), init.frames.scale.node());
}

TEST(RunIsa, TranslationOnlyKeepsScaleAndIdentityRotation) {
  ModelConfig cfg = small_config(Variant::kIsaT);
  const auto store = attention_store(cfg, 21);
  ParamBinding<double> params(store);
  const auto init = random_init(cfg, 22);
  const auto st = run_isa(Tensor<double>::constant(random_array({36, 5}, 23)), make_abs_grid<double>(6, 6), init, cfg,
                          AttentionWeights<double>::bind(params));
  EXPECT_TRUE(bitwise_equal(st.frames.scale.value(), init.frames.scale.value()));
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(st.frames.rotation.value()[s * 4], 1.0);
    EXPECT_EQ(st.frames.rotation.value()[s * 4 + 1], 0.0);
    EXPECT_EQ(st.frames.rotation.value()[s * 4 + 2], 0.0);
    EXPECT_EQ(st.frames.rotation.value()[s * 4 + 3], 1.0);
  }
  EXPECT_FALSE(bitwise_equal(st.frames.position.value(), init.frames.position.value()));
}

TEST(RunIsa, PermutingInitPermutesOutputs) {
  for (Variant v : {Variant::kSA, Variant::kIsaT, Variant::kIsaTS, Variant::kIsaTSR}) {
    ModelConfig cfg = small_config(v);
    const auto store = attention_store(cfg, 24);
    ParamBinding<double> params(store);
    const auto w = AttentionWeights<double>::bind(params);
    const auto tokens = Tensor<double>::constant(random_array({36, 5}, 25));
    const auto grid = make_abs_grid<double>(6, 6);
    const auto init = random_init(cfg, 26);
    const std::vector<std::size_t> perm{2, 0, 1};
    auto permute = [&](const Array<double>& a) {
      Array<double> out(a.shape());
      const std::size_t row = a.size() / a.dim(0);
      for (std::size_t i = 0; i < 3; ++i) std::memcpy(out.ptr() + i * row, a.ptr() + perm[i] * row, row * sizeof(double));
      return out;
    };
    SlotState<double> pinit;
    pinit.latents = Tensor<double>::constant(permute(init.latents.value()));
    pinit.frames = {Tensor<double>::constant(permute(init.frames.position.value())),
                    Tensor<double>::constant(permute(init.frames.scale.value())),
                    Tensor<double>::constant(permute(init.frames.rotation.value()))};
    const auto a = run_isa(tokens, grid, init, cfg, w);
    const auto b = run_isa(tokens, grid, pinit, cfg, w);
    EXPECT_TRUE(bitwise_equal(permute(a.latents.value()), b.latents.value())) << to_string(v);
    EXPECT_TRUE(bitwise_equal(permute(a.attn.value()), b.attn.value())) << to_string(v);
    EXPECT_TRUE(bitwise_equal(permute(a.frames.position.value()), b.frames.position.value())) << to_string(v);
    EXPECT_TRUE(bitwise_equal(permute(a.frames.rotation.value()), b.frames.rotation.value())) << to_string(v);
  }
}

TEST(RunIsa, NonFiniteSlotsNameTheIteration) {
  ModelConfig cfg = small_config(Variant::kIsaTSR);
  auto store = attention_store(cfg, 27);
  store.get("attn/mlp/dense1/b")[0] = NAN;
  ParamBinding<double> params(store);
  try {
    run_isa(Tensor<double>::constant(random_array({36, 5}, 28)), make_abs_grid<double>(6, 6), random_init(cfg, 29), cfg,
            AttentionWeights<double>::bind(params));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(AttentionScale, RuleSelectsSlotsOrWidth) {
  ModelConfig cfg;
  cfg.num_slots = 4;
  cfg.attn_dim = 64;
  EXPECT_DOUBLE_EQ(attention_scale<double>(cfg), 0.5);
  cfg.variant.attn_scale = AttnScaleRule::kInvSqrtDim;
  EXPECT_DOUBLE_EQ(attention_scale<double>(cfg), 0.125);
}

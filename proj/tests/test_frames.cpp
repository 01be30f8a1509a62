#include <numbers>

#include "slotframes/frames.hpp"
#include "slotframes/oracles.hpp"
#include "test_util.hpp"

using namespace slotframes;

namespace {

constexpr double kPi = std::numbers::pi;

SlotFrames<double> frames(std::vector<double> pos, std::vector<double> scale, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {tensor({1, 2}, std::move(pos)), tensor({1, 2}, std::move(scale)), tensor({1, 2, 2}, {c, -s, s, c})};
}

// Attention row [1,N] with the given weights at the given token indices.
Tensor<double> mask(std::size_t n, const std::vector<std::pair<std::size_t, double>>& entries) {
  Array<double> a(Shape{1, n});
  for (auto [i, v] : entries) a[i] = v;
  return Tensor<double>::constant(a);
}

double angle_of(const Array<double>& r, std::size_t slot = 0) { return std::atan2(r[slot * 4 + 2], r[slot * 4]); }

}  // namespace

TEST(AbsGrid, TwoByTwoCorners) {
  expect_values(make_abs_grid<double>(2, 2).coords, {-1, -1, 1, -1, -1, 1, 1, 1}, 0.0);
}

TEST(AbsGrid, CenterTokenIsOrigin) {
  const auto g = make_abs_grid<double>(3, 3);
  EXPECT_EQ(g.coords[4 * 2], 0.0);
  EXPECT_EQ(g.coords[4 * 2 + 1], 0.0);
}

TEST(AbsGrid, LinearSpacingPerRow) {
  const auto g = make_abs_grid<double>(2, 3);
  for (std::size_t row = 0; row < 2; ++row) {
    EXPECT_EQ(g.coords[(row * 3 + 0) * 2], -1.0);
    EXPECT_EQ(g.coords[(row * 3 + 1) * 2], 0.0);
    EXPECT_EQ(g.coords[(row * 3 + 2) * 2], 1.0);
  }
}

TEST(AbsGrid, TooSmallThrows) { EXPECT_THROW(make_abs_grid<double>(1, 4), ConfigError); }

TEST(RelGrid, CenteredPointMapsToOrigin) {
  const auto abs = tensor({1, 2}, {0.2, 0.0});
  const auto rel = make_rel_grid(abs, frames({0.2, 0.0}, {0.37, 0.11}, 0.3), 5.0, true).value();
  expect_values(rel, {0, 0}, 1e-15);
}

TEST(RelGrid, ScaleTenthWithDeltaFiveSpansTwo) {
  const auto abs = tensor({1, 2}, {1.0, 0.0});
  const auto rel = make_rel_grid(abs, frames({0, 0}, {0.1, 0.1}, 0.0), 5.0, true).value();
  expect_values(rel, {2, 0}, 1e-12);
}

TEST(RelGrid, RotationIsInverted) {
  // A 90 degree frame maps the abs point (0,1) onto its first axis.
  const auto abs = tensor({1, 2}, {0.0, 1.0});
  const auto rel = make_rel_grid(abs, frames({0, 0}, {1, 1}, kPi / 2), 1.0, true).value();
  expect_values(rel, {1, 0}, 1e-12);
}

TEST(RelGrid, TranslationOnlySkipsScaleAndRotation) {
  const auto abs = tensor({1, 2}, {0.5, -0.5});
  const auto rel = make_rel_grid(abs, frames({0.1, 0.2}, {0.1, 0.1}, 0.4), 5.0, false, false).value();
  expect_values(rel, {0.4, -0.7}, 1e-15);
}

TEST(EncodeGrid, BiasOnlyGivesConstantField) {
  const auto g = make_abs_grid<double>(3, 4).tensor();
  const Dense<double> proj{tensor({2, 3}, std::vector<double>(6, 0.0)), tensor({3}, {1, 2, 3})};
  const auto out = encode_grid(g, proj).value();
  for (std::size_t n = 0; n < 12; ++n) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out[n * 3 + c], c + 1.0);
  }
}

TEST(EncodeGrid, MatchesPerTokenOracle) {
  const auto g = make_abs_grid<double>(4, 3);
  const auto w = random_array({2, 5}, 1), b = random_array({5}, 2);
  const auto out = encode_grid(g.tensor(), Dense<double>{Tensor<double>::constant(w), Tensor<double>::constant(b)}).value();
  for (std::size_t n = 0; n < 12; ++n)
    for (std::size_t c = 0; c < 5; ++c)
      EXPECT_NEAR(out[n * 5 + c], g.coords[n * 2] * w[c] + g.coords[n * 2 + 1] * w[5 + c] + b[c], 1e-14);
}

TEST(EstimatePosition, UniformOverSymmetricGridIsOrigin) {
  const auto abs = make_abs_grid<double>(5, 6).tensor();
  const auto p = estimate_position(Tensor<double>::constant(Array<double>(Shape{1, 30}, 1.0 / 30)), abs).value();
  expect_values(p, {0, 0}, 1e-15);
}

TEST(EstimatePosition, PointMass) {
  // Token (row 1, col 3) of a 5x5 grid sits at (0.5, -0.5).
  const auto abs = make_abs_grid<double>(5, 5).tensor();
  expect_values(estimate_position(mask(25, {{1 * 5 + 3, 1.0}}), abs).value(), {0.5, -0.5}, 1e-15);
}

TEST(EstimatePosition, Midpoint) {
  const auto abs = make_abs_grid<double>(3, 3).tensor();
  expect_values(estimate_position(mask(9, {{3, 0.5}, {5, 0.5}}), abs).value(), {0, 0}, 1e-15);
}

TEST(EstimateScale, PointMassHitsFloor) {
  const auto abs = make_abs_grid<double>(5, 5).tensor();
  const auto a = mask(25, {{7, 1.0}});
  const auto s = estimate_scale<double>(a, abs, estimate_position(a, abs), nullptr, 0.0).value();
  expect_values(s, {kScaleFloor, kScaleFloor}, 0.0);
}

TEST(EstimateScale, UniformOverThirtyFiveColumns) {
  const auto abs = make_abs_grid<double>(2, 35).tensor();
  const auto a = Tensor<double>::constant(Array<double>(Shape{1, 70}, 1.0 / 70));
  const auto s = estimate_scale<double>(a, abs, estimate_position(a, abs), nullptr, 0.0).value();
  double var = 0;
  for (std::size_t i = 0; i < 35; ++i) {
    const double x = -1.0 + 2.0 * i / 34.0;
    var += x * x / 35.0;
  }
  EXPECT_NEAR(s[0], std::sqrt(var), 1e-14);
  EXPECT_NEAR(s[0], 0.5941, 5e-5);
}

TEST(EstimateScale, SampledGaussianMatchesDirectSum) {
  const std::size_t h = 31, w = 31;
  const auto pts = oracle::grid_coords(h, w);
  const auto mass = oracle::gaussian_mass(pts, {0, 0}, 0.2, 0.2, 0.0);
  Array<double> a(Shape{1, h * w});
  double total = 0;
  for (double m : mass) total += m;
  for (std::size_t n = 0; n < mass.size(); ++n) a[n] = mass[n] / total;
  const auto abs = make_abs_grid<double>(h, w).tensor();
  const auto at = Tensor<double>::constant(a);
  const auto s = estimate_scale<double>(at, abs, estimate_position(at, abs), nullptr, 0.0).value();
  const auto direct = oracle::weighted_second_moment(mass, pts, {0, 0}, {1, 0, 0, 1});
  EXPECT_NEAR(s[0], std::sqrt(direct[0]), 1e-12);
  EXPECT_NEAR(s[1], std::sqrt(direct[1]), 1e-12);
  EXPECT_NEAR(s[0], 0.2, 5e-3);
}

TEST(EstimateRotation, AxisAlignedMassIsIdentity) {
  const auto abs = make_abs_grid<double>(5, 5).tensor();
  const auto a = mask(25, {{10, 0.2}, {11, 0.2}, {12, 0.2}, {13, 0.2}, {14, 0.2}});
  expect_values(estimate_rotation(a, abs, estimate_position(a, abs)).value(), {1, 0, 0, 1}, 1e-15);
}

TEST(EstimateRotation, DiagonalPointPairIsQuarterPi) {
  // (c,c) and (-c,-c): covariance [[c^2, c^2], [c^2, c^2]] has its principal
  // axis at 45 degrees, which the (-45, 45] range keeps.
  const auto abs = make_abs_grid<double>(5, 5).tensor();
  const auto a = mask(25, {{1 * 5 + 1, 0.5}, {3 * 5 + 3, 0.5}});
  const auto r = estimate_rotation(a, abs, estimate_position(a, abs)).value();
  EXPECT_NEAR(angle_of(r), kPi / 4, 1e-12);
  EXPECT_NEAR(oracle::principal_angle_scan(0.25, 0.25, 0.25), kPi / 4, 1e-9);
}

TEST(EstimateRotation, IsotropicMassIsIdentity) {
  const auto abs = make_abs_grid<double>(5, 5).tensor();
  const auto a = Tensor<double>::constant(Array<double>(Shape{1, 25}, 1.0 / 25));
  expect_values(estimate_rotation(a, abs, estimate_position(a, abs)).value(), {1, 0, 0, 1}, 0.0);
}

TEST(EstimateRotation, IsotropicCovarianceHasNoGradient) {
  const auto cov = Tensor<double>::leaf(Array<double>(Shape{1, 3}, {0.3, 0.0, 0.3}));
  backward(sum(mul(rotation_from_covariance(cov), tensor({1, 2, 2}, {1, 2, 3, 4}))));
  if (cov.grad() != nullptr) expect_values(*cov.grad(), {0, 0, 0}, 0.0);
}

TEST(PostProcessAxes, SwappedAxesBecomeIdentity) {
  const auto r = post_process_axes({0, 1}, {1, 0});
  EXPECT_NEAR(r[0], 1, 1e-15);
  EXPECT_NEAR(r[1], 0, 1e-15);
  EXPECT_NEAR(r[2], 0, 1e-15);
  EXPECT_NEAR(r[3], 1, 1e-15);
}

TEST(PostProcessAxes, ReducesAngleFamily) {
  auto unit = [](double deg) { return Vec2{std::cos(deg * kPi / 180), std::sin(deg * kPi / 180)}; };
  auto perp = [](Vec2 v) { return Vec2{-v[1], v[0]}; };
  for (auto [in, out] : std::vector<std::pair<double, double>>{{100, 10}, {30, 30}, {-170, 10}, {-60, 30}, {135, 45}}) {
    const auto r = post_process_axes(unit(in), perp(unit(in)));
    EXPECT_NEAR(std::atan2(r[2], r[0]) * 180 / kPi, out, 1e-9) << in;
    EXPECT_NEAR(r[0] * r[3] - r[1] * r[2], 1.0, 1e-12);
  }
}

TEST(PostProcessAxes, MirroredPairIsFixed) {
  const auto r = post_process_axes({1, 0}, {0, -1});
  EXPECT_NEAR(r[0] * r[3] - r[1] * r[2], 1.0, 1e-15);
}

TEST(PostProcessAxes, NonOrthonormalThrows) { EXPECT_THROW(post_process_axes({1, 0}, {1, 1}), NumericError); }

TEST(InitFrames, SampledIsReproducible) {
  FrameInitSpec spec;
  Rng a(5), b(5);
  const auto fa = init_frames<double>(spec, 4, true, a, nullptr);
  const auto fb = init_frames<double>(spec, 4, true, b, nullptr);
  EXPECT_EQ(max_abs_diff(fa.position.value(), fb.position.value()), 0.0);
  EXPECT_EQ(max_abs_diff(fa.scale.value(), fb.scale.value()), 0.0);
  EXPECT_EQ(max_abs_diff(fa.rotation.value(), fb.rotation.value()), 0.0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_GE(fa.scale.value()[i], kScaleFloor);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_LE(std::abs(angle_of(fa.rotation.value(), s)), kPi / 4 + 1e-12);
}

TEST(InitFrames, LearnedScaleNearPointOne) {
  ParamStore<float> store;
  Rng rng(3);
  register_frame_params(store, 256, rng);
  const auto& s = store.get("frames/scale");
  double mean = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(s[i], 0.1, 0.05);
    mean += s[i] / s.size();
  }
  EXPECT_NEAR(mean, 0.1, 3 * 0.01 / std::sqrt(static_cast<double>(s.size())));
}

TEST(InitFrames, IdentityRotationSpec) {
  FrameInitSpec spec;
  spec.identity_rotation = true;
  Rng rng(1);
  const auto f = init_frames<double>(spec, 3, true, rng, nullptr);
  for (std::size_t s = 0; s < 3; ++s) {
    expect_values(Array<double>(Shape{4}, {f.rotation.value()[s * 4], f.rotation.value()[s * 4 + 1],
                                           f.rotation.value()[s * 4 + 2], f.rotation.value()[s * 4 + 3]}),
                  {1, 0, 0, 1}, 0.0);
  }
}

TEST(InitFrames, LearnedNeedsParameters) {
  FrameInitSpec spec;
  spec.mode = FrameInitMode::kLearned;
  Rng rng(1);
  EXPECT_THROW(init_frames<double>(spec, 2, true, rng, nullptr), ConfigError);
}

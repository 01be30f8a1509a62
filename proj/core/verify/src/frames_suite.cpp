#include <chrono>
#include <cmath>
#include <numbers>

#include "slotframes/oracles.hpp"
#include "slotframes/verify.hpp"
#include "verify_util.hpp"

namespace slotframes::verify {

namespace {

using TensorD = Tensor<double>;
constexpr double kDeg = std::numbers::pi / 180.0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PropertyResult make_result(const std::string& name, double measured, double tol, std::string detail) {
  return PropertyResult{name, measured <= tol, measured, tol, std::move(detail)};
}

double max_abs_diff(const Array<double>& a, const Array<double>& b, const std::array<double, 2>& offset = {0, 0}) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i] - offset[i % 2]));
  return m;
}

// Random mask on an HxW grid supported on a box, plus the same mask moved by
// (dx, dy) cells. The box is placed so the moved copy stays inside.
struct ShiftedMask {
  Array<double> base;     // [1,N]
  Array<double> shifted;  // [1,N]
  long dx = 0, dy = 0;
};

ShiftedMask random_shifted_mask(std::size_t h, std::size_t w, Rng& rng) {
  const std::size_t bh = 3 + rng.below(h / 3), bw = 3 + rng.below(w / 3);
  ShiftedMask m{Array<double>(Shape{1, h * w}), Array<double>(Shape{1, h * w})};
  const long top = static_cast<long>(rng.below(h - bh + 1)), left = static_cast<long>(rng.below(w - bw + 1));
  do {
    m.dy = static_cast<long>(rng.below(h - bh + 1)) - top;
    m.dx = static_cast<long>(rng.below(w - bw + 1)) - left;
  } while (m.dx == 0 && m.dy == 0);
  for (std::size_t i = 0; i < bh; ++i) {
    for (std::size_t j = 0; j < bw; ++j) {
      const double v = rng.uniform(0.05, 1.0);
      const std::size_t r = static_cast<std::size_t>(top) + i, c = static_cast<std::size_t>(left) + j;
      m.base[r * w + c] = v;
      m.shifted[(r + m.dy) * w + (c + m.dx)] = v;
    }
  }
  auto normalize = [](Array<double>& a) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    for (std::size_t i = 0; i < a.size(); ++i) a[i] /= s;
  };
  normalize(m.base);
  normalize(m.shifted);
  return m;
}

struct Estimates {
  Array<double> position, scale, rotation;
};

Estimates estimate_all(const Array<double>& mask, const TensorD& abs, double eps) {
  const auto a = TensorD::constant(mask);
  const auto p = estimate_position(a, abs);
  const auto r = estimate_rotation(a, abs, p);
  const auto s = estimate_scale<double>(a, abs, p, &r, eps);
  return {p.value(), s.value(), r.value()};
}

std::vector<PropertyResult> translation_checks() {
  const std::size_t h = 20, w = 24;
  const auto grid = make_abs_grid<double>(h, w);
  const auto abs = grid.tensor();
  const double cell_x = 2.0 / static_cast<double>(w - 1), cell_y = 2.0 / static_cast<double>(h - 1);
  const double eps = GridParams{}.epsilon;

  double pos_err = 0, scale_err = 0, rot_err = 0, eps_dev = 0, eps_bound = 0;
  const std::size_t cases = 200;
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(derive_seed(2000, c));
    const auto m = random_shifted_mask(h, w, rng);
    const auto e0 = estimate_all(m.base, abs, 0.0);
    const auto e1 = estimate_all(m.shifted, abs, 0.0);
    pos_err = std::max(pos_err, max_abs_diff(e1.position, e0.position, {m.dx * cell_x, m.dy * cell_y}));
    scale_err = std::max(scale_err, max_abs_diff(e1.scale, e0.scale));
    rot_err = std::max(rot_err, max_abs_diff(e1.rotation, e0.rotation));

    // With eps > 0 every token carries weight eps, and that background does
    // not move with the content. The variance moves by at most
    // 2 eps N D^2 / (1 + eps N) with D^2 = 8 the squared grid diameter.
    const auto f0 = estimate_all(m.base, abs, eps);
    const auto f1 = estimate_all(m.shifted, abs, eps);
    const double n = static_cast<double>(h * w);
    const double var_bound = 2.0 * eps * n * 8.0 / (1.0 + eps * n);
    for (std::size_t i = 0; i < 2; ++i) {
      const double dv = std::abs(f1.scale[i] * f1.scale[i] - f0.scale[i] * f0.scale[i]);
      eps_dev = std::max(eps_dev, dv);
    }
    eps_bound = var_bound;
  }
  const std::string detail = std::to_string(cases) + " random box masks, integer cell shifts on a 20x24 grid";
  return {make_result("frames/translation/position", pos_err, 1e-10, detail),
          make_result("frames/translation/scale_eps0", scale_err, 1e-10, detail + ", eps = 0"),
          make_result("frames/translation/rotation", rot_err, 1e-10, detail),
          make_result("frames/translation/scale_eps_bound", eps_dev, eps_bound,
                      "variance change with eps = 1e-8 against the background-weight bound")};
}

// Rotating the coordinate system by phi rotates the principal axis by phi;
// after post-processing the angle is that sum wrapped into (-45, 45].
PropertyResult rotation_equivariance_check() {
  const std::size_t h = 16, w = 16;
  const auto grid = make_abs_grid<double>(h, w);
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t c = 0; cases < 100; ++c) {
    Rng rng(derive_seed(2100, c));
    Array<double> mask = random_uniform(Shape{1, h * w}, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = std::pow(mask[i], 4.0);
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Array<double> rotated(grid.coords.shape());
    const double cs = std::cos(phi), sn = std::sin(phi);
    for (std::size_t n = 0; n < h * w; ++n) {
      const double x = grid.coords[n * 2], y = grid.coords[n * 2 + 1];
      rotated[n * 2] = cs * x - sn * y;
      rotated[n * 2 + 1] = sn * x + cs * y;
    }
    const auto a = TensorD::constant(mask);
    if (!rotation_is_smooth(a, grid.tensor()) || !rotation_is_smooth(a, TensorD::constant(rotated))) continue;
    const auto r0 = estimate_all(mask, grid.tensor(), 0.0).rotation;
    const auto r1 = estimate_all(mask, TensorD::constant(rotated), 0.0).rotation;
    const double a0 = std::atan2(r0[2], r0[0]);
    const double a1 = std::atan2(r1[2], r1[0]);
    const double expected = std::remainder(a0 + phi, std::numbers::pi / 2.0);
    worst = std::max(worst, std::abs(std::remainder(a1 - expected, std::numbers::pi / 2.0)));
    ++cases;
  }
  return make_result("frames/rotation_equivariance", worst, 1e-10,
                     "100 random masks, coordinates rotated by a random angle");
}

// Anisotropic Gaussians at a known angle: the estimate must recover it, and
// it must agree with an angle scan of the same weighted covariance.
std::vector<PropertyResult> rotation_recovery_checks() {
  const std::size_t h = 32, w = 32;
  const auto grid = make_abs_grid<double>(h, w);
  const auto pts = oracle::grid_coords(h, w);
  double worst_true = 0.0, worst_oracle = 0.0;
  for (std::size_t c = 0; c < 100; ++c) {
    Rng rng(derive_seed(2200, c));
    const double phi = rng.uniform(5.0, 40.0) * kDeg;
    const double minor = rng.uniform(0.06, 0.15);
    const double major = minor * rng.uniform(2.0, 3.0);
    const std::array<double, 2> center{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const auto mass = oracle::gaussian_mass(pts, center, major, minor, phi);
    Array<double> mask(Shape{1, h * w});
    double total = 0;
    for (double m : mass) total += m;
    for (std::size_t n = 0; n < mass.size(); ++n) mask[n] = mass[n] / total;

    const auto r = estimate_all(mask, grid.tensor(), 0.0).rotation;
    const double est = std::atan2(r[2], r[0]);
    worst_true = std::max(worst_true, std::abs(est - phi));

    const auto mean = oracle::weighted_mean(mass, pts);
    double cxx = 0, cxy = 0, cyy = 0;
    for (std::size_t n = 0; n < pts.size(); ++n) {
      const double dx = pts[n][0] - mean[0], dy = pts[n][1] - mean[1];
      cxx += mass[n] * dx * dx;
      cxy += mass[n] * dx * dy;
      cyy += mass[n] * dy * dy;
    }
    const double scan = oracle::principal_angle_scan(cxx, cxy, cyy);
    worst_oracle = std::max(worst_oracle, std::abs(std::remainder(est - scan, std::numbers::pi / 2.0)));
  }
  return {make_result("frames/rotation_recovery_deg", worst_true / kDeg, 1.0,
                      "100 Gaussians on 32x32, phi in [5, 40] deg, axis ratio 2 to 3"),
          make_result("frames/rotation_vs_scan_oracle_deg", worst_oracle / kDeg, 1e-6,
                      "closed form against a scanned principal axis of the same covariance")};
}

}  // namespace

SuiteReport frames_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport r;
  r.suite = "frames";
  r.properties = translation_checks();
  r.properties.push_back(rotation_equivariance_check());
  for (auto& p : rotation_recovery_checks()) r.properties.push_back(std::move(p));
  r.seconds = seconds_since(t0);
  return r;
}

// Weighted statistics of rel_grid under frames estimated from random masks:
// the attn-weighted mean is 0 and the per-axis second moment is 1/delta^2.
SuiteReport relgrid_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t h = 16, w = 16, k = 4;
  const double delta = GridParams{}.delta;
  const double eps = GridParams{}.epsilon;
  const auto grid = make_abs_grid<double>(h, w);
  const auto abs = grid.tensor();
  double worst_mean = 0.0, worst_moment = 0.0;
  const std::size_t cases = 100;
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(derive_seed(2300, c));
    // Softmax over slots of sharpened random logits, as attention produces.
    const double sharp = rng.uniform(0.5, 8.0);
    Array<double> logits = random_normal(Shape{k, h * w}, rng);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] *= sharp;
    auto attn = softmax(TensorD::constant(logits), 0);
    attn = div(attn, sum_axis(attn, 1, true));
    SlotFrames<double> f;
    f.position = estimate_position(attn, abs);
    f.rotation = estimate_rotation(attn, abs, f.position);
    f.scale = estimate_scale<double>(attn, abs, f.position, &f.rotation, eps);
    const auto rel = make_rel_grid(abs, f, delta, true).value();
    const auto& a = attn.value();
    for (std::size_t s = 0; s < k; ++s) {
      std::vector<double> ws(a.ptr() + s * h * w, a.ptr() + (s + 1) * h * w);
      std::vector<std::array<double, 2>> pts(h * w);
      for (std::size_t n = 0; n < h * w; ++n) pts[n] = {rel[(s * h * w + n) * 2], rel[(s * h * w + n) * 2 + 1]};
      const auto m = oracle::weighted_mean(ws, pts);
      const auto mom = oracle::weighted_second_moment(ws, pts, {0.0, 0.0}, {1.0, 0.0, 0.0, 1.0});
      worst_mean = std::max({worst_mean, std::abs(m[0]), std::abs(m[1])});
      const double target = 1.0 / (delta * delta);
      worst_moment = std::max({worst_moment, std::abs(mom[0] - target), std::abs(mom[1] - target)});
    }
  }
  SuiteReport r;
  r.suite = "relgrid";
  const std::string detail = std::to_string(cases) + " random masks, K=4 on 16x16, ISA-TSR frames, delta=5";
  r.properties = {make_result("relgrid/weighted_mean", worst_mean, 1e-5, detail),
                  make_result("relgrid/second_moment", worst_moment, 1e-4, detail)};
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace slotframes::verify

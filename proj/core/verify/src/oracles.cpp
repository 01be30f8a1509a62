#include "slotframes/oracles.hpp"

#include <cmath>

namespace slotframes::oracle {

double pair_counting_ari(std::span<const int> pred, std::span<const int> truth) {
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp && st) {
        a += 1;
      } else if (sp) {
        b += 1;
      } else if (st) {
        c += 1;
      } else {
        d += 1;
      }
    }
  }
  const double denom = (a + b) * (b + d) + (a + c) * (c + d);
  if (denom == 0.0) return 1.0;
  return 2.0 * (a * d - b * c) / denom;
}

std::vector<std::array<double, 2>> grid_coords(std::size_t height, std::size_t width) {
  std::vector<std::array<double, 2>> out;
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      out.push_back({-1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(width - 1),
                     -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(height - 1)});
    }
  }
  return out;
}

std::array<double, 2> weighted_mean(std::span<const double> w, const std::vector<std::array<double, 2>>& p) {
  double sx = 0, sy = 0, sw = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    sx += w[n] * p[n][0];
    sy += w[n] * p[n][1];
    sw += w[n];
  }
  return {sx / sw, sy / sw};
}

std::array<double, 2> weighted_second_moment(std::span<const double> w, const std::vector<std::array<double, 2>>& p,
                                             const std::array<double, 2>& center, const std::array<double, 4>& rot) {
  double sx = 0, sy = 0, sw = 0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    const double dx = p[n][0] - center[0];
    const double dy = p[n][1] - center[1];
    // R^T d
    const double u = rot[0] * dx + rot[2] * dy;
    const double v = rot[1] * dx + rot[3] * dy;
    sx += w[n] * u * u;
    sy += w[n] * v * v;
    sw += w[n];
  }
  return {sx / sw, sy / sw};
}

double principal_angle_scan(double a, double b, double c) {
  auto q = [&](double t) {
    const double x = std::cos(t), y = std::sin(t);
    return a * x * x + 2.0 * b * x * y + c * y * y;
  };
  const double pi = std::acos(-1.0);
  const int steps = 3600;
  double best_t = 0.0, best_q = q(0.0);
  for (int i = 1; i < steps; ++i) {
    const double t = -pi / 2.0 + pi * static_cast<double>(i) / steps;
    if (q(t) > best_q) {
      best_q = q(t);
      best_t = t;
    }
  }
  // The maximum is flat, so refine on the derivative instead, which has a
  // simple sign change there: q'(t) = (c - a) sin 2t + 2b cos 2t.
  auto dq = [&](double t) { return (c - a) * std::sin(2.0 * t) + 2.0 * b * std::cos(2.0 * t); };
  double lo = best_t - pi / steps, hi = best_t + pi / steps;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (dq(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double t = 0.5 * (lo + hi);
  if (t <= -pi / 2.0) t += pi;
  if (t > pi / 2.0) t -= pi;
  return t;
}

std::vector<double> gaussian_mass(const std::vector<std::array<double, 2>>& grid, std::array<double, 2> center,
                                  double sigma_major, double sigma_minor, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<double> out(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double dx = grid[n][0] - center[0], dy = grid[n][1] - center[1];
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    out[n] = std::exp(-0.5 * (u * u / (sigma_major * sigma_major) + v * v / (sigma_minor * sigma_minor)));
  }
  return out;
}

}  // namespace slotframes::oracle

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace slotframes::oracle {

// Reference computations written as plain loops over doubles, sharing no
// code with the library under test.

/// ARI from the four pair counts over all n(n-1)/2 element pairs:
/// a = same/same, b = same pred only, c = same truth only, d = different/different.
double pair_counting_ari(std::span<const int> pred, std::span<const int> truth);

/// Endpoint-inclusive grid coordinates (x along width), row-major, [N][2].
std::vector<std::array<double, 2>> grid_coords(std::size_t height, std::size_t width);

/// sum_n w_n p_n / sum_n w_n
std::array<double, 2> weighted_mean(std::span<const double> w, const std::vector<std::array<double, 2>>& p);

/// Per-axis weighted second moment of p_n about `center` after rotating the
/// offsets by the transpose of `rot` (row-major 2x2).
std::array<double, 2> weighted_second_moment(std::span<const double> w, const std::vector<std::array<double, 2>>& p,
                                             const std::array<double, 2>& center, const std::array<double, 4>& rot);

/// Principal-axis angle in radians of a 2x2 symmetric matrix [[a, b], [b, c]],
/// found by scanning unit vectors for the maximal quadratic form and refining
/// with bisection on its derivative; the result lies in (-pi/2, pi/2].
double principal_angle_scan(double a, double b, double c);

/// Unnormalized anisotropic Gaussian density on the grid.
std::vector<double> gaussian_mass(const std::vector<std::array<double, 2>>& grid, std::array<double, 2> center,
                                  double sigma_major, double sigma_minor, double angle);

}  // namespace slotframes::oracle

#pragma once

#include <gtest/gtest.h>

#include <cmath>

#include "slotframes/tensor.hpp"
#include "slotframes/rng.hpp"

namespace sf = slotframes;

template <typename T = double>
sf::Tensor<T> tensor(sf::Shape shape, std::vector<T> data) {
  return sf::Tensor<T>::constant(sf::Array<T>(std::move(shape), std::move(data)));
}

template <typename T = double>
sf::Array<T> random_array(sf::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  sf::Rng rng(seed);
  sf::Array<T> a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<T>(rng.uniform(lo, hi));
  return a;
}

template <typename T>
double max_abs_diff(const sf::Array<T>& a, const sf::Array<T>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

template <typename T>
void expect_values(const sf::Array<T>& a, const std::vector<double>& expected, double tol) {
  ASSERT_EQ(a.size(), expected.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], expected[i], tol) << "index " << i;
}

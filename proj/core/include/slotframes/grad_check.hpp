#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "slotframes/tensor.hpp"

namespace slotframes {

struct GradCheckReport {
  bool passed = false;
  bool finite = true;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string diagnostic;
};

/// Relative error floor: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-7;

/// Compares the reverse-mode gradient of a scalar function with central
/// differences, element by element, in double precision.
GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& fn, const Array<double>& x,
                           double eps = 1e-4, double tol = 1e-3);

}  // namespace slotframes

#include "slotframes/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slotframes {

namespace {

double eval_scalar(const std::function<Tensor<double>(const Tensor<double>&)>& fn, const Array<double>& x) {
  const auto y = fn(Tensor<double>::constant(x));
  if (y.size() != 1) throw DimensionError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
  return y.item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& fn, const Array<double>& x,
                           double eps, double tol) {
  GradCheckReport report;
  auto leaf = Tensor<double>::leaf(x);
  const auto y = fn(leaf);
  if (y.size() != 1) throw DimensionError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
  if (!std::isfinite(y.item())) {
    report.finite = false;
    report.diagnostic = "function value is not finite";
    return report;
  }
  backward(y);
  Array<double> analytic = leaf.grad() ? *leaf.grad() : Array<double>(x.shape());

  Array<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = eval_scalar(fn, probe);
    probe[i] = orig - eps;
    const double fm = eval_scalar(fn, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      report.finite = false;
      std::ostringstream os;
      os << "non-finite gradient at index " << i << " (analytic " << a << ", numeric " << numeric << ")";
      report.diagnostic = os.str();
      report.worst_index = i;
      return report;
    }
    const double abs_err = std::abs(a - numeric);
    const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || i == 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel_err);
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.passed = report.max_rel_error < tol;
  if (!report.passed) {
    std::ostringstream os;
    os << "max relative error " << report.max_rel_error << " at index " << report.worst_index << " (analytic "
       << report.worst_analytic << ", numeric " << report.worst_numeric << ")";
    report.diagnostic = os.str();
  }
  return report;
}

}  // namespace slotframes

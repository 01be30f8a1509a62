#include "slotframes/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace slotframes {

namespace {

double pairs(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double ari(std::span<const int> pred, std::span<const int> truth, bool foreground_only) {
  if (pred.size() != truth.size()) {
    throw DimensionError("ari: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(truth.size()) +
                         " true labels");
  }
  std::map<std::pair<int, int>, std::size_t> table;
  std::map<int, std::size_t> rows, cols;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (foreground_only && truth[i] == 0) continue;
    ++table[{truth[i], pred[i]}];
    ++rows[truth[i]];
    ++cols[pred[i]];
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, c] : table) index += pairs(static_cast<double>(c));
  for (const auto& [key, c] : rows) sum_rows += pairs(static_cast<double>(c));
  for (const auto& [key, c] : cols) sum_cols += pairs(static_cast<double>(c));
  const double total = pairs(static_cast<double>(n));
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> argmax_slots(const Array<float>& alpha) {
  const std::size_t k = alpha.dim(0);
  const std::size_t n = alpha.size() / k;
  std::vector<int> labels(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    float best = alpha[p];
    for (std::size_t s = 1; s < k; ++s) {
      if (alpha[s * n + p] > best) {
        best = alpha[s * n + p];
        labels[p] = static_cast<int>(s);
      }
    }
  }
  return labels;
}

template <typename T>
std::vector<int> predicted_labels(const DecodedSlots<T>& d) {
  return argmax_slots(d.alpha.value().template cast<float>());
}

double squared_error(const Array<float>& pred, const Array<float>& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    s += e * e;
  }
  return s;
}

double mse(std::span<const Array<float>> pred, std::span<const Array<float>> target) {
  if (pred.size() != target.size() || pred.empty()) throw DimensionError("mse needs equally sized, non-empty batches");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += squared_error(pred[i], target[i]);
  return s / static_cast<double>(pred.size());
}

template std::vector<int> predicted_labels(const DecodedSlots<float>&);
template std::vector<int> predicted_labels(const DecodedSlots<double>&);

}  // namespace slotframes

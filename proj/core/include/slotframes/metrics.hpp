#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slotframes/decoder.hpp"

namespace slotframes {

/// Adjusted Rand index from the contingency table. With `foreground_only`,
/// pixels whose true label is 0 are dropped. Returns NaN when no pixels
/// remain (callers must flag it); returns 1 when the index is undefined
/// because neither partition can disagree (both a single cluster, both all
/// singletons, fewer than two elements).
double ari(std::span<const int> pred, std::span<const int> truth, bool foreground_only);

/// Per-pixel argmax over slot alphas [K,H,W,1]; ties go to the lowest slot.
template <typename T>
std::vector<int> predicted_labels(const DecodedSlots<T>& d);

std::vector<int> argmax_slots(const Array<float>& alpha);

/// Squared error summed over pixels and channels, averaged over images.
double mse(std::span<const Array<float>> pred, std::span<const Array<float>> target);
double squared_error(const Array<float>& pred, const Array<float>& target);

}  // namespace slotframes

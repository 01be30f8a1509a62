#pragma once

#include <cstdint>
#include <vector>

#include "slotframes/param_store.hpp"

namespace slotframes {

struct TrainConfig {
  double lr_peak = 4e-4;
  std::size_t warmup_steps = 500;
  std::size_t total_steps = 5000;
  std::size_t batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_every = 1000;
  std::size_t checkpoint_every = 1000;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::size_t threads = 1;

  void validate() const;
};

/// Linear warmup from 0 to lr_peak, then cosine decay to 0 at total_steps.
double lr_schedule(std::size_t step, const TrainConfig& cfg);

template <typename T>
struct AdamState {
  std::vector<Array<T>> m;
  std::vector<Array<T>> v;
  std::uint64_t t = 0;
};

template <typename T>
AdamState<T> make_adam_state(const ParamStore<T>& params);

/// One bias-corrected Adam update, computed in double per element. Throws
/// NumericError naming the parameter if a gradient is not finite.
template <typename T>
void adam_step(ParamStore<T>& params, const std::vector<Array<T>>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg);

/// Scales gradients so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
template <typename T>
double clip_global_norm(std::vector<Array<T>>& grads, double max_norm);

}  // namespace slotframes

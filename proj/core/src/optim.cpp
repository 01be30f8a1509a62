#include "slotframes/optim.hpp"

#include <cmath>
#include <numbers>

namespace slotframes {

void TrainConfig::validate() const {
  if (!(lr_peak >= 0.0)) throw ConfigError("lr_peak must be >= 0");
  if (total_steps > 0 && warmup_steps >= total_steps) throw ConfigError("warmup_steps must be < total_steps");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must be in [0,1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be > 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  if (step <= cfg.warmup_steps) {
    if (cfg.warmup_steps == 0) return cfg.total_steps == 0 ? 0.0 : cfg.lr_peak;
    return cfg.lr_peak * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (step >= cfg.total_steps) return 0.0;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return cfg.lr_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
AdamState<T> make_adam_state(const ParamStore<T>& params) {
  AdamState<T> s;
  for (const auto& [name, value] : params.entries()) {
    s.m.emplace_back(value.shape());
    s.v.emplace_back(value.shape());
  }
  return s;
}

template <typename T>
void adam_step(ParamStore<T>& params, const std::vector<Array<T>>& grads, AdamState<T>& state, double lr,
               const TrainConfig& cfg) {
  auto& entries = params.entries();
  if (grads.size() != entries.size() || state.m.size() != entries.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t p = 0; p < entries.size(); ++p) {
    if (!grads[p].all_finite()) throw NumericError("non-finite gradient for parameter '" + entries[p].first + "'");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& w = entries[p].second;
    const auto& g = grads[p];
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template <typename T>
double clip_global_norm(std::vector<Array<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<T>(static_cast<double>(g[i]) * s);
    }
  }
  return norm;
}

template AdamState<float> make_adam_state(const ParamStore<float>&);
template AdamState<double> make_adam_state(const ParamStore<double>&);
template void adam_step(ParamStore<float>&, const std::vector<Array<float>>&, AdamState<float>&, double,
                        const TrainConfig&);
template void adam_step(ParamStore<double>&, const std::vector<Array<double>>&, AdamState<double>&, double,
                        const TrainConfig&);
template double clip_global_norm(std::vector<Array<float>>&, double);
template double clip_global_norm(std::vector<Array<double>>&, double);

}  // namespace slotframes

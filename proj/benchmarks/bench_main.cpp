#include <benchmark/benchmark.h>

#include "slotframes/model.hpp"
#include "slotframes/scene_synth.hpp"

using namespace slotframes;

namespace {

Array<float> random_array(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Array<float> a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return a;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto a = Tensor<float>::constant(random_array({n, n}, 1));
  const auto b = Tensor<float>::constant(random_array({n, n}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value().ptr());
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

// One encoder layer at the default width.
void BM_Conv5x5(benchmark::State& state) {
  const std::size_t hw = state.range(0);
  const auto x = Tensor<float>::constant(random_array({hw, hw, 64}, 3));
  const auto k = Tensor<float>::constant(random_array({5, 5, 64, 64}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_same(x, k, 1, Padding::kZero).value().ptr());
  state.SetItemsProcessed(state.iterations() * 2 * hw * hw * 25 * 64 * 64);
}
BENCHMARK(BM_Conv5x5)->Arg(16)->Arg(35);

ModelConfig variant_config(int v) {
  ModelConfig cfg;
  cfg.variant.mode = static_cast<Variant>(v);
  return cfg;
}

// Forward pass of the full 35x35 autoencoder per variant (SA, ISA-T, ISA-TS, ISA-TSR).
void BM_Forward(benchmark::State& state) {
  const auto cfg = variant_config(static_cast<int>(state.range(0)));
  const Model<float> model(cfg);
  const auto store = init_params(cfg, 0);
  const auto image = Tensor<float>::constant(generate_scene(DatasetSpec{}, 7).image);
  for (auto _ : state) {
    ParamBinding<float> params(store, false);
    Rng rng(1);
    benchmark::DoNotOptimize(model.forward(params, image, rng).reconstruction.value().ptr());
  }
  state.SetLabel(to_string(cfg.variant.mode));
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto cfg = variant_config(static_cast<int>(state.range(0)));
  const Model<float> model(cfg);
  const auto store = init_params(cfg, 0);
  const auto image = Tensor<float>::constant(generate_scene(DatasetSpec{}, 7).image);
  for (auto _ : state) {
    ParamBinding<float> params(store);
    Rng rng(1);
    const auto out = model.forward(params, image, rng);
    backward(reconstruction_loss(out.reconstruction, image));
    benchmark::DoNotOptimize(params.gradients().size());
  }
  state.SetLabel(to_string(cfg.variant.mode));
}
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

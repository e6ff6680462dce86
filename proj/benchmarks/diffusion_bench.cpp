#include <benchmark/benchmark.h>

#include "lmd/diffusion.hpp"
#include "lmd/grounded.hpp"
#include "lmd/rng.hpp"

using namespace lmd;

namespace {

LatentImage random_latent(LatentShape shape, std::uint64_t seed) {
  Rng rng(seed);
  return LatentImage::gaussian(shape, rng);
}

void BM_DdimStep(benchmark::State& state) {
  const LatentShape shape{4, static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const auto s = make_schedule(1000);
  const auto pred = make_analytic_predictor(s, random_latent(shape, 1), 0.25);
  const Condition cond{LatentImage(shape), {}};
  const auto x = random_latent(shape, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddim_step(x, 500, 480, s, *pred, cond));
  }
}
BENCHMARK(BM_DdimStep)->Arg(16)->Arg(64);

void BM_DdimInversion(benchmark::State& state) {
  const LatentShape shape{4, 64, 64};
  const auto s = make_schedule(1000);
  const auto pred = make_analytic_predictor(s, random_latent(shape, 3), 0.25);
  const Condition cond{LatentImage(shape), {}};
  const auto x0 = random_latent(shape, 4);
  const int iters = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddim_invert(x0, s, *pred, cond, 50, InversionOptions{iters}));
  }
}
BENCHMARK(BM_DdimInversion)->Arg(0)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ComposeTwoObjects(benchmark::State& state) {
  GenerationConfig config;
  config.seed = 7;
  const Layout layout = Layout::make({ObjectSpec::make("a red circle", {48, 160, 176, 176}),
                                      ObjectSpec::make("a blue square", {288, 160, 176, 176})},
                                     "A realistic image of a gray room");
  const auto assets = build_assets(layout, config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compose_and_generate(layout, assets, config));
  }
}
BENCHMARK(BM_ComposeTwoObjects)->Unit(benchmark::kMillisecond);

}  // namespace

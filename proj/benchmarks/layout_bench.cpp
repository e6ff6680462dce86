#include <benchmark/benchmark.h>

#include "lmd/layout_dsl.hpp"
#include "lmd/prompt.hpp"
#include "lmd/svg.hpp"

using namespace lmd;

namespace {

void BM_ParseLayout(benchmark::State& state) {
  const RawCompletion raw{serialize_layout(skier_example().layout)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_layout(raw));
  }
}
BENCHMARK(BM_ParseLayout);

void BM_ExtractLayoutBlock(benchmark::State& state) {
  const std::string response = "Sure! Here is the layout.\n" + serialize_layout(panda_example().layout) +
                               "\nLet me know if you need anything else.";
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_layout_block(response));
  }
}
BENCHMARK(BM_ExtractLayoutBlock);

void BM_BuildPrompt(benchmark::State& state) {
  const PromptTemplate tmpl = default_template();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_prompt(tmpl, "A dog and a cat on a sofa"));
  }
}
BENCHMARK(BM_BuildPrompt);

void BM_RenderSvg(benchmark::State& state) {
  const Layout layout = skier_example().layout;
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_layout_svg(layout));
  }
}
BENCHMARK(BM_RenderSvg);

}  // namespace

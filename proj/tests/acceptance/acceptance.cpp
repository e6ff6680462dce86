#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lmd/app_config.hpp"
#include "lmd/benchmark.hpp"
#include "lmd/diffusion.hpp"
#include "lmd/grounded.hpp"
#include "lmd/layout_dsl.hpp"
#include "lmd/pipeline.hpp"
#include "lmd/prompt.hpp"
#include "lmd/rng.hpp"

using namespace lmd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kRoundTripLayouts = 1000;
constexpr int kFuzzInputs = 100'000;
constexpr int kBenchmarkN = 100;
constexpr double kBenchmarkSeconds = 5.0;
constexpr double kScheduleTolerance = 1e-13;
constexpr double kNoiseRecoveryTolerance = 1e-9;
constexpr double kInversionTolerance = 1e-3;
constexpr double kInversionSeconds = 2.0;
constexpr double kMaskIouFloor = 0.5;
constexpr double kGroundedSeconds = 30.0;
constexpr std::uint64_t kPipelineSeed = 7;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

std::string random_text(Rng& rng, std::size_t max_len) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789,.'\"\\[]()-:;!?";
  std::string out;
  const std::size_t len = 1 + rng.index(max_len);
  for (std::size_t i = 0; i < len; ++i) out.push_back(alphabet[rng.index(alphabet.size())]);
  return out;
}

Layout random_layout(Rng& rng) {
  Layout layout;
  const std::size_t n = rng.index(6);
  for (std::size_t i = 0; i < n; ++i) {
    std::string desc = random_text(rng, 30);
    if (trim(desc).empty()) desc = "x" + desc;
    const int x = static_cast<int>(rng.index(600)) - 40;
    const int y = static_cast<int>(rng.index(600)) - 40;
    const int w = 1 + static_cast<int>(rng.index(512));
    const int h = 1 + static_cast<int>(rng.index(512));
    layout.objects.push_back(ObjectSpec::make(desc, {x, y, w, h}));
  }
  std::string bg = trim(random_text(rng, 40));
  layout.background_prompt = bg.empty() ? "a scene" : bg;
  return layout;
}

LatentImage random_latent(LatentShape shape, std::uint64_t seed) {
  Rng rng(seed);
  return LatentImage::gaussian(shape, rng);
}

Condition empty_condition(LatentShape shape) { return Condition{LatentImage(shape), {}}; }

Outcome prompt_golden(const fs::path& golden) {
  Outcome o;
  std::ifstream in(golden, std::ios::binary);
  o.check(static_cast<bool>(in), "cannot read " + golden.string());
  if (!o.pass) return o;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string prompt = build_prompt(default_template(), "[User Prompt]");
  o.check(prompt == ss.str(), "prompt differs from the reference text");
  o.detail = o.pass ? std::to_string(prompt.size()) + " bytes identical" : o.detail;
  return o;
}

Outcome parser() {
  Outcome o;
  Rng rng(17);
  int round_trips = 0;
  for (int i = 0; i < kRoundTripLayouts; ++i) {
    const Layout layout = random_layout(rng);
    const ParseResult r = parse_layout(RawCompletion{serialize_layout(layout)});
    if (r.ok() && r.layout() == layout) ++round_trips;
  }
  o.check(round_trips == kRoundTripLayouts,
          std::to_string(kRoundTripLayouts - round_trips) + " round trips differ");

  const ParseResult skier = parse_layout(RawCompletion{
      "Objects: [('a skier', [5, 152, 139, 168]), ('a skier', [278, 192, 121, 158]), ('a skier', "
      "[148, 173, 124, 155]), ('a palm tree', [404, 180, 103, 180])]\nBackground prompt: A "
      "realistic image of an outdoor scene with snow"});
  o.check(skier.ok() && skier.layout() == skier_example().layout, "skier layout");
  const ParseResult panda = parse_layout(RawCompletion{
      "[('a panda eating bambooo', [30, 133, 212, 226]), ('a panda eating bambooo', [262, 137, 222, "
      "221])]\nBackground prompt: A watercolor painting of a forest"});
  o.check(panda.ok() && panda.layout() == panda_example().layout, "panda layout");

  Rng fuzz(99);
  int thrown = 0;
  for (int i = 0; i < kFuzzInputs; ++i) {
    std::string bytes(fuzz.index(96), '\0');
    for (char& c : bytes) c = static_cast<char>(fuzz.index(256));
    try {
      (void)parse_layout(RawCompletion{bytes});
      (void)extract_layout_block(bytes);
    } catch (...) {
      ++thrown;
    }
  }
  o.check(thrown == 0, std::to_string(thrown) + " fuzz inputs threw");
  if (o.pass) {
    o.detail = std::to_string(round_trips) + " round trips, skier and panda exact, " +
               std::to_string(kFuzzInputs) + " fuzz inputs";
  }
  return o;
}

BenchmarkOptions all_kinds() {
  BenchmarkOptions opts;
  opts.kinds = {TaskKind::Negation, TaskKind::Numeracy, TaskKind::AttributeAssignment,
                TaskKind::SpatialRelationship};
  opts.n = kBenchmarkN;
  opts.parallelism = 4;
  return opts;
}

Outcome benchmark_logic() {
  Outcome o;
  const auto opts = all_kinds();
  BenchmarkOracleLlm oracle;
  const auto start = Clock::now();
  const BenchmarkReport perfect = run_benchmark(oracle, LlmConfig{}, default_template(), opts);
  const double elapsed = seconds_since(start);
  o.check(elapsed < kBenchmarkSeconds, "perfect run took " + fmt(elapsed) + " s");
  for (const auto& [kind, acc] : perfect.accuracy_by_kind) {
    o.check(acc == 1.0, std::string(to_string(kind)) + " perfect accuracy " + fmt(acc));
  }
  o.check(perfect.accuracy_by_kind.size() == 4, "perfect run missing kinds");

  const auto tasks = generate_benchmark_tasks(opts);
  auto scripted = make_scripted_failure_llm(tasks, 7, 2);
  const BenchmarkReport report = run_benchmark(*scripted, LlmConfig{}, default_template(), opts);
  const std::string expected =
      "Benchmarks              Accuracy (%)\n"
      "Negation                100%\n"
      "Generative Numeracy     93%\n"
      "Attribute Assignment    100%\n"
      "Spatial Relationships   98%\n";
  o.check(report.to_table() == expected, "scripted table:\n" + report.to_table());
  if (o.pass) o.detail = "perfect 100% x4 in " + fmt(elapsed) + " s, scripted 100/93/100/98";
  return o;
}

Outcome diffusion_numerics() {
  Outcome o;
  for (int T : {1, 2, 1000}) {
    const double start = 1e-4;
    const double end = T == 1 ? 1e-4 : 0.02;
    const NoiseSchedule s = make_schedule(T, start, end);
    long double prod = 1.0L;
    bool ok = s.alpha_bar(0) == 1.0 && static_cast<int>(s.alpha_bars.size()) == T;
    for (int t = 1; t <= T && ok; ++t) {
      const long double beta =
          T == 1 ? start : start + (static_cast<long double>(end) - start) * (t - 1) / (T - 1);
      prod *= 1.0L - beta;
      ok = std::abs(s.beta(t) - static_cast<double>(beta)) < kScheduleTolerance &&
           std::abs(s.alpha(t) - (1.0 - s.beta(t))) < kScheduleTolerance &&
           std::abs(s.alpha_bar(t) - static_cast<double>(prod)) < kScheduleTolerance &&
           s.alpha_bar(t) < s.alpha_bar(t - 1) && s.alpha_bar(t) > 0.0;
    }
    o.check(ok, "schedule invariants fail for T=" + std::to_string(T));
  }

  const NoiseSchedule s = make_schedule(1000);
  const LatentShape small{2, 3, 4};
  const auto target = random_latent(small, 7);
  const auto exact = make_analytic_predictor(s, target);
  double worst = 0.0;
  for (int t : {1, 10, 250, 999, 1000}) {
    const auto noise = random_latent(small, 100 + static_cast<std::uint64_t>(t));
    const auto eps = exact->predict(forward_diffuse(target, t, s, noise), t, empty_condition(small));
    worst = std::max(worst, max_abs_diff(eps, noise));
  }
  o.check(worst < kNoiseRecoveryTolerance, "noise recovery error " + fmt(worst));

  const LatentShape shape{4, 64, 64};
  const auto data_target = random_latent(shape, 29);
  const auto pred = make_analytic_predictor(s, data_target, 0.25);
  const auto cond = empty_condition(shape);
  const auto x_T = random_latent(shape, 30);
  const auto a = ddim_sample(x_T, s, *pred, cond, 50);
  const auto b = ddim_sample(x_T, s, *pred, cond, 50);
  o.check(a.latents == b.latents, "DDIM sampling is not bitwise deterministic");

  const LatentImage& x0 = a.clean();
  double previous = INFINITY;
  double err50 = INFINITY;
  double seconds50 = 0.0;
  for (int n : {10, 25, 50}) {
    const auto start = Clock::now();
    const auto inv = ddim_invert(x0, s, *pred, cond, n, InversionOptions{5});
    const double err = max_abs_diff(ddim_sample(inv.noisiest(), s, *pred, cond, n).clean(), x0);
    const double elapsed = seconds_since(start);
    o.check(err < previous, "inversion error not decreasing at " + std::to_string(n) + " steps");
    previous = err;
    if (n == 50) {
      err50 = err;
      seconds50 = elapsed;
    }
  }
  std::string plain_errors;
  previous = INFINITY;
  for (int n : {10, 25, 50}) {
    const auto inv = ddim_invert(x0, s, *pred, cond, n);
    const double err = max_abs_diff(ddim_sample(inv.noisiest(), s, *pred, cond, n).clean(), x0);
    o.check(err < previous, "uncorrected inversion error not decreasing at " + std::to_string(n) + " steps");
    previous = err;
    plain_errors += (plain_errors.empty() ? "" : "/") + fmt(err);
  }
  o.check(err50 < kInversionTolerance, "50-step round trip error " + fmt(err50));
  o.check(seconds50 < kInversionSeconds, "50-step round trip took " + fmt(seconds50) + " s");
  if (o.pass) {
    o.detail = "noise err " + fmt(worst) + ", round trip err " + fmt(err50) + " in " + fmt(seconds50) +
               " s, uncorrected 10/25/50 " + plain_errors;
  }
  return o;
}

Layout shapes_layout(Canvas canvas) {
  const double k = canvas.width / 512.0;
  auto scaled = [&](int v) { return static_cast<int>(std::lround(v * k)); };
  return Layout::make(
      {ObjectSpec::make("a red circle", {scaled(48), scaled(160), scaled(176), scaled(176)}),
       ObjectSpec::make("a blue square", {scaled(288), scaled(160), scaled(176), scaled(176)})},
      "A realistic image of a gray room", canvas);
}

bool foreground_matches(const std::vector<ForegroundAsset>& assets, const LatentImage& x, std::size_t k,
                        bool clean) {
  for (const auto& asset : assets) {
    const Offset off = placement_offset(asset);
    const LatentImage& ref = clean ? asset.trajectory.clean() : asset.trajectory.latents[k];
    const LatentShape shape = x.shape();
    for (int y = 0; y < shape.height; ++y) {
      for (int xx = 0; xx < shape.width; ++xx) {
        if (asset.mask.at(y, xx) == 0) continue;
        const int ty = y + off.dy;
        const int tx = xx + off.dx;
        if (ty < 0 || tx < 0 || ty >= shape.height || tx >= shape.width) continue;
        for (int ch = 0; ch < shape.channels; ++ch) {
          if (x.at(ch, ty, tx) != ref.at(ch, y, xx)) return false;
        }
      }
    }
  }
  return true;
}

Outcome grounded_generation() {
  Outcome o;
  GenerationConfig small;
  small.latent_shape = LatentShape{4, 32, 32};
  small.canvas = Canvas{256, 256};
  small.n_steps = 20;
  small.seed = 3;
  const Layout small_layout = shapes_layout(small.canvas);
  const auto small_assets = build_assets(small_layout, small);
  const auto grid = step_grid(small.T, small.n_steps);

  int frozen_checked = 0;
  bool frozen_ok = true;
  (void)compose_and_generate(small_layout, small_assets, small, [&](int step, int t, const LatentImage& x) {
    if (step >= small.frozen_steps()) return;
    const auto k = static_cast<std::size_t>(small.n_steps - step - 1);
    frozen_ok = frozen_ok && grid[k] == t && foreground_matches(small_assets, x, k, false);
    ++frozen_checked;
  });
  o.check(frozen_ok && frozen_checked == small.frozen_steps(), "frozen-phase foreground differs");

  GenerationConfig all_frozen = small;
  all_frozen.r = 0.0;
  const auto r0 = compose_and_generate(small_layout, small_assets, all_frozen);
  o.check(foreground_matches(small_assets, r0.image, 0, true), "r=0 foreground differs from asset samples");

  GenerationConfig all_free = small;
  all_free.r = 1.0;
  const auto r1 = compose_and_generate(small_layout, small_assets, all_free);
  const NoiseSchedule s = all_free.schedule();
  const CompositePredictor composite(s, all_free.data_std);
  const auto plain =
      ddim_sample(r1.composed_noise, s, composite, composite_condition(small_layout, all_free), all_free.n_steps);
  o.check(r1.image == plain.clean(), "r=1 differs from plain sampling");

  GenerationConfig full;
  full.seed = 7;
  const Layout layout = shapes_layout(Canvas{});
  const auto start = Clock::now();
  const auto assets = build_assets(layout, full, 2);
  const auto result = compose_and_generate(layout, assets, full);
  const double elapsed = seconds_since(start);
  o.check(elapsed < kGroundedSeconds, "two-object run took " + fmt(elapsed) + " s");
  std::string ious;
  for (std::size_t k = 0; k < assets.size(); ++k) {
    const auto box = to_latent_box(layout.objects[k].box, layout.canvas, full.latent_shape);
    const BinaryMask placed = placed_mask(assets[k]);
    const double iou = mask_iou(placed, box_mask(box, full.latent_shape.height, full.latent_shape.width));
    o.check(iou >= kMaskIouFloor, "object " + std::to_string(k) + " mask IoU " + fmt(iou));
    ious += (ious.empty() ? "" : "/") + fmt(iou);
    double r = 0, g = 0, b = 0;
    int n = 0;
    for (int y = 0; y < placed.height(); ++y) {
      for (int x = 0; x < placed.width(); ++x) {
        if (placed.at(y, x) == 0) continue;
        const Rgb p = decode_pixel(result.image, y, x);
        r += p.r;
        g += p.g;
        b += p.b;
        ++n;
      }
    }
    const std::string expected = describe_object(layout.objects[k].description).color_name;
    const std::string got = n > 0 ? nearest_color_name(Rgb{r / n, g / n, b / n}) : "none";
    o.check(got == expected, "object " + std::to_string(k) + " color " + got + ", expected " + expected);
  }
  if (o.pass) {
    o.detail = std::to_string(frozen_checked) + " frozen steps exact, r=0/r=1 bitwise, IoU " + ious + " in " +
               fmt(elapsed) + " s";
  }
  return o;
}

Outcome end_to_end(const fs::path& data_dir) {
  Outcome o;
  const RunStore store(data_dir);
  auto backend = make_mock_backend();
  PipelineOptions options;
  options.generation = AppConfig{}.generation;
  options.generation.seed = kPipelineSeed;
  options.parallelism = 2;
  const std::string caption = "two pandas in a forest";
  const RunRecord a = run_pipeline(*backend, LlmConfig{}, caption, options, store);
  const RunRecord b = run_pipeline(*backend, LlmConfig{}, caption, options, store);
  o.check(a.status == RunStatus::ImageDone && b.status == RunStatus::ImageDone, "run did not finish");
  o.check(store.read_artifact(a.id, "image.png") == store.read_artifact(b.id, "image.png"),
          "PNG differs between runs");
  o.check(a.layout.has_value() && !a.layout->objects.empty(), "no layout objects");
  std::vector<std::string> expected{"run.json", "layout.json", "layout.svg", "image.png", "image.bin",
                                    "compose.json"};
  if (a.layout) {
    for (std::size_t k = 0; k < a.layout->objects.size(); ++k) {
      for (const char* f : {"trajectory.bin", "mask.pbm", "asset.json"}) {
        expected.push_back("assets/" + std::to_string(k) + "/" + f);
      }
    }
  }
  for (const auto& name : expected) {
    o.check(fs::exists(store.run_dir(a.id) / name), "missing artifact " + name);
  }
  if (o.pass) o.detail = "two runs bitwise equal, " + std::to_string(expected.size()) + " artifacts";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path data_dir = fs::temp_directory_path() / "lmd-acceptance";
  fs::path golden = fs::path(LMD_TEST_DATA_DIR) / "default_prompt.txt";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--data-dir") {
      data_dir = argv[i + 1];
    } else if (flag == "--golden") {
      golden = argv[i + 1];
    } else {
      std::cerr << "usage: acceptance [--data-dir DIR] [--golden FILE]\n";
      return 2;
    }
  }
  fs::remove_all(data_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"prompt-golden", [&] { return prompt_golden(golden); }},
      {"layout-parser", parser},
      {"benchmark-logic", benchmark_logic},
      {"diffusion-numerics", diffusion_numerics},
      {"grounded-generation", grounded_generation},
      {"end-to-end", [&] { return end_to_end(data_dir); }},
  };

  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

#include "lmd/pipeline.hpp"

#include <chrono>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lmd/dialog.hpp"
#include "lmd/image_io.hpp"
#include "lmd/rng.hpp"
#include "lmd/svg.hpp"
#include "lmd/trajectory_io.hpp"

namespace lmd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string as_string(const std::vector<std::uint8_t>& bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::string> validation_warnings(const Layout& layout, const ValidationReport& report) {
  std::vector<std::string> out;
  for (const auto i : report.out_of_bounds) {
    out.push_back("object " + std::to_string(i) + " ('" + layout.objects[i].description +
                  "') extends beyond the canvas");
  }
  for (const auto& [a, b] : report.overlapping_pairs) {
    out.push_back("objects " + std::to_string(a) + " and " + std::to_string(b) + " overlap");
  }
  return out;
}

void run_image_stage(RunRecord& record, const Layout& layout, const PipelineOptions& options,
                     const RunStore& store) {
  GenerationConfig config = options.generation;
  config.canvas = layout.canvas;
  const auto start = Clock::now();
  GenerationResult result = generate_from_layout(layout, config, options.parallelism);
  record.timings_ms["image"] = ms_since(start);
  for (const auto& obj : layout.objects) {
    for (auto& w : describe_object(obj.description).warnings) {
      record.warnings.push_back(std::move(w));
    }
  }
  for (auto& w : describe_background(layout.background_prompt).warnings) {
    record.warnings.push_back(std::move(w));
  }
  try {
    auto names = persist_generation(store, record.id, result, config);
    record.artifacts.insert(record.artifacts.end(), names.begin(), names.end());
  } catch (const std::exception& e) {
    throw StageError(Stage::Image, "persist_failed", e.what());
  }
  record.advance(RunStatus::ImageDone);
  store.store(record);
}

template <typename Body>
RunRecord with_failure_record(RunRecord record, const RunStore& store, Body&& body) {
  try {
    body(record);
  } catch (const StageError& e) {
    record.fail(RunError{std::string(to_string(e.stage())), e.code(), e.what()});
    store.store(record);
    throw;
  }
  return record;
}

}  // namespace

std::string_view to_string(Stage stage) {
  return stage == Stage::Layout ? "layout" : "image";
}

LayoutStageResult run_layout_stage(ChatBackend& backend, const LlmConfig& config,
                                   const PromptTemplate& tmpl, std::string_view caption,
                                   Canvas canvas, const Sleeper& sleep) {
  if (trim(caption).empty()) {
    throw StageError(Stage::Layout, "invalid_caption", "caption must not be empty");
  }
  std::string completion;
  try {
    completion = request_layout(backend, config, build_prompt(tmpl, caption), sleep).text;
  } catch (const LlmError& e) {
    throw StageError(Stage::Layout, "llm_error", e.what());
  } catch (const std::invalid_argument& e) {
    throw StageError(Stage::Layout, "invalid_request", e.what());
  }
  ParseResult parsed = parse_completion(completion, canvas);
  if (!parsed.ok()) {
    const auto& d = parsed.error();
    throw StageError(Stage::Layout, "layout_parse_error",
                     std::string(to_string(d.kind)) + ": " + d.message, d);
  }
  LayoutStageResult result{parsed.layout(), std::move(completion), {}, parsed.warnings()};
  result.validation = validate_layout(result.layout);
  return result;
}

GenerationResult generate_from_layout(const Layout& layout, const GenerationConfig& config,
                                      int parallelism) {
  try {
    GenerationResult result;
    result.layout = layout;
    result.assets = build_assets(layout, config, parallelism);
    result.composed = compose_and_generate(layout, result.assets, config);
    result.image = latent_to_rgb(result.composed.image, config.canvas.width, config.canvas.height);
    return result;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::Image, "image_generation_failed", e.what());
  }
}

std::vector<std::string> persist_generation(const RunStore& store, const std::string& run_id,
                                            const GenerationResult& result,
                                            const GenerationConfig& config) {
  std::vector<std::string> names;
  auto put = [&](const std::string& name, std::string_view bytes) {
    store.write_artifact(run_id, name, bytes);
    names.push_back(name);
  };
  put("layout.json", nlohmann::json(result.layout).dump(2) + "\n");
  put("layout.svg", render_layout_svg(result.layout));
  for (std::size_t k = 0; k < result.assets.size(); ++k) {
    const auto& asset = result.assets[k];
    const std::string dir = "assets/" + std::to_string(k) + "/";
    std::ostringstream traj;
    write_trajectory(traj, asset.trajectory, config.T, mix_seed(config.seed, k + 1));
    put(dir + "trajectory.bin", traj.str());
    put(dir + "mask.pbm", encode_pbm(asset.mask));
    nlohmann::json meta{{"description", asset.spec.description},
                        {"box", asset.spec.box},
                        {"latent_box", asset.latent_box},
                        {"mask_outer_box", asset.mask_outer_box},
                        {"offset", {placement_offset(asset).dx, placement_offset(asset).dy}},
                        {"roundtrip_error", asset.roundtrip_error}};
    put(dir + "asset.json", meta.dump(2) + "\n");
  }
  put("image.png", as_string(encode_png(result.image)));
  std::ostringstream raw;
  write_latent(raw, result.composed.image, config.T, config.seed);
  put("image.bin", raw.str());
  put("compose.json", nlohmann::json(result.composed.record).dump(2) + "\n");
  return names;
}

nlohmann::json config_snapshot(const PipelineOptions& options, const LlmConfig& llm) {
  return nlohmann::json{{"generation", options.generation},
                        {"llm", llm},
                        {"parallelism", options.parallelism}};
}

RunRecord run_pipeline(ChatBackend& backend, const LlmConfig& llm, const std::string& caption,
                       const PipelineOptions& options, const RunStore& store,
                       std::optional<RunRecord> record) {
  options.generation.validate();
  RunRecord rec = record ? std::move(*record) : RunRecord::create(caption, config_snapshot(options, llm));
  store.store(rec);
  return with_failure_record(std::move(rec), store, [&](RunRecord& r) {
    const auto start = Clock::now();
    LayoutStageResult stage = run_layout_stage(backend, llm, options.prompt_template, caption,
                                               options.generation.canvas, options.sleep);
    r.timings_ms["layout"] = ms_since(start);
    r.layout = stage.layout;
    for (const auto& w : stage.parse_warnings) {
      r.warnings.push_back(std::string(to_string(w.kind)) + ": " + w.message);
    }
    for (auto& w : validation_warnings(stage.layout, stage.validation)) {
      r.warnings.push_back(std::move(w));
    }
    r.advance(RunStatus::LayoutDone);
    store.store(r);
    run_image_stage(r, stage.layout, options, store);
  });
}

RunRecord run_generation(const Layout& layout, const PipelineOptions& options, const RunStore& store,
                         std::optional<RunRecord> record) {
  options.generation.validate();
  RunRecord rec = record ? std::move(*record) : RunRecord::create(
      "", nlohmann::json{{"generation", options.generation}, {"parallelism", options.parallelism}});
  rec.layout = layout;
  for (auto& w : validation_warnings(layout, validate_layout(layout))) {
    rec.warnings.push_back(std::move(w));
  }
  rec.advance(RunStatus::LayoutDone);
  store.store(rec);
  return with_failure_record(std::move(rec), store, [&](RunRecord& r) {
    run_image_stage(r, layout, options, store);
  });
}

}  // namespace lmd

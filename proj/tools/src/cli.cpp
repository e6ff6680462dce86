#include "lmd/cli.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lmd/app_config.hpp"
#include "lmd/benchmark.hpp"
#include "lmd/dialog.hpp"
#include "lmd/pipeline.hpp"
#include "lmd/run_store.hpp"
#include "lmd/service.hpp"
#include "lmd/svg.hpp"

namespace lmd {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config_path;
  std::string data_dir;
  bool mock = false;
  int parallelism = 0;
};

struct GenerationFlags {
  std::optional<std::uint64_t> seed;
  std::optional<double> r;
  std::optional<int> n_steps;
  std::optional<double> attenuation;
};

void add_generation_flags(CLI::App* cmd, GenerationFlags& g) {
  cmd->add_option("--seed", g.seed, "Random seed");
  cmd->add_option("--r", g.r, "Fraction of free denoising steps")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--steps", g.n_steps, "Number of sampling steps")->check(CLI::PositiveNumber);
  cmd->add_option("--attenuation", g.attenuation, "Object term weight outside its box")
      ->check(CLI::Range(0.0, 1.0));
}

AppConfig resolve_config(const GlobalOptions& g) {
  AppConfig config = g.config_path.empty() ? AppConfig{} : load_app_config(g.config_path);
  config = config.with_env_overrides();
  if (!g.data_dir.empty()) config.data_dir = g.data_dir;
  if (g.mock) config.use_mock = true;
  if (g.parallelism > 0) config.parallelism = g.parallelism;
  config.validate();
  return config;
}

PipelineOptions pipeline_options(const AppConfig& config, const GenerationFlags& flags,
                                 const std::string& language) {
  PipelineOptions opts;
  opts.generation = config.generation;
  if (flags.seed) opts.generation.seed = *flags.seed;
  if (flags.r) opts.generation.r = *flags.r;
  if (flags.n_steps) opts.generation.n_steps = *flags.n_steps;
  if (flags.attenuation) opts.generation.attenuation = *flags.attenuation;
  opts.generation.validate();
  opts.parallelism = config.parallelism;
  if (!language.empty() && language != "en") {
    if (!translated_example_caption(language)) {
      throw UsageError("unsupported language: " + language);
    }
    opts.prompt_template = template_for_language(opts.prompt_template, language);
  }
  return opts;
}

Layout read_layout_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_discarded()) {
    try {
      return j.get<Layout>();
    } catch (const std::exception& e) {
      throw UsageError("invalid layout JSON in " + path + ": " + e.what());
    }
  }
  const ParseResult parsed = parse_completion(text, Canvas{});
  if (!parsed.ok()) {
    throw UsageError("cannot parse layout file " + path + ": " + parsed.error().message);
  }
  return parsed.layout();
}

nlohmann::json run_summary(const RunRecord& record, const RunStore& store) {
  return nlohmann::json{{"run_id", record.id},
                        {"status", to_string(record.status)},
                        {"run_dir", store.run_dir(record.id).string()},
                        {"artifacts", record.artifacts},
                        {"warnings", record.warnings}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage layout-grounded toy image generation", "lmd"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON config file");
  app.add_option("--data-dir", global.data_dir, "Directory for run records and artifacts");
  app.add_flag("--mock", global.mock, "Use the offline mock LLM");
  app.add_option("--parallelism", global.parallelism, "Worker thread bound")->check(CLI::PositiveNumber);

  std::string caption;
  std::string language;
  std::string layout_path;
  std::string out_path;
  std::vector<std::string> kinds;
  int n = 100;
  std::uint64_t bench_seed = 0;
  std::string json_path;
  std::string host;
  int port = -1;
  GenerationFlags gen_flags;

  auto* layout_cmd = app.add_subcommand("layout", "Ask the LLM for a layout and print it as JSON");
  layout_cmd->add_option("caption", caption, "Image caption")->required();
  layout_cmd->add_option("--language", language, "Caption language code (zh, fr, de, es, ja)");

  auto* generate_cmd = app.add_subcommand("generate", "Generate an image from a layout file");
  generate_cmd->add_option("--layout", layout_path, "Layout file (JSON or the text format)")->required();
  add_generation_flags(generate_cmd, gen_flags);

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Caption to layout to image");
  pipeline_cmd->add_option("caption", caption, "Image caption")->required();
  pipeline_cmd->add_option("--language", language, "Caption language code (zh, fr, de, es, ja)");
  add_generation_flags(pipeline_cmd, gen_flags);

  auto* bench_cmd = app.add_subcommand("benchmark", "Score layouts on the four reasoning benchmarks");
  bench_cmd->add_option("--kind", kinds, "negation, numeracy, attribute, spatial or all")
      ->default_str("all");
  bench_cmd->add_option("--n", n, "Tasks per benchmark")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--seed", bench_seed, "Task sampling seed");
  bench_cmd->add_option("--json", json_path, "Also write the full report as JSON");

  auto* render_cmd = app.add_subcommand("render", "Render a layout file as SVG");
  render_cmd->add_option("--layout", layout_path, "Layout file (JSON or the text format)")->required();
  render_cmd->add_option("--out", out_path, "Output SVG path")->required();

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Bind port")->check(CLI::Range(0, 65535));

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("lmd");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    const AppConfig config = resolve_config(global);

    if (*layout_cmd) {
      auto backend = make_backend(config);
      PromptTemplate tmpl = pipeline_options(config, gen_flags, language).prompt_template;
      const LayoutStageResult r = run_layout_stage(*backend, config.llm, tmpl, caption);
      for (const auto& w : r.parse_warnings) err << "warning: " << w.message << "\n";
      out << nlohmann::json(r.layout).dump(2) << "\n";
      return kExitOk;
    }

    if (*generate_cmd) {
      const Layout layout = read_layout_file(layout_path);
      const RunStore store(config.data_dir);
      const RunRecord record = run_generation(layout, pipeline_options(config, gen_flags, ""), store);
      out << run_summary(record, store).dump(2) << "\n";
      return kExitOk;
    }

    if (*pipeline_cmd) {
      auto backend = make_backend(config);
      const RunStore store(config.data_dir);
      const RunRecord record =
          run_pipeline(*backend, config.llm, caption, pipeline_options(config, gen_flags, language), store);
      out << run_summary(record, store).dump(2) << "\n";
      return kExitOk;
    }

    if (*bench_cmd) {
      BenchmarkOptions opts;
      opts.n = n;
      opts.seed = bench_seed;
      opts.parallelism = config.parallelism;
      if (kinds.empty() || (kinds.size() == 1 && kinds.front() == "all")) {
        opts.kinds = {TaskKind::Negation, TaskKind::Numeracy, TaskKind::AttributeAssignment,
                      TaskKind::SpatialRelationship};
      } else {
        for (const auto& k : kinds) {
          try {
            opts.kinds.push_back(task_kind_from_string(k));
          } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
          }
        }
      }
      auto backend = make_backend(config);
      const BenchmarkReport report = run_benchmark(*backend, config.llm, default_template(), opts);
      out << report.to_table();
      if (!json_path.empty()) {
        write_file_atomic(json_path, nlohmann::json(report).dump(2) + "\n");
      }
      return kExitOk;
    }

    if (*render_cmd) {
      const Layout layout = read_layout_file(layout_path);
      write_file_atomic(out_path, render_layout_svg(layout));
      return kExitOk;
    }

    if (*serve_cmd) {
      AppConfig c = config;
      if (!host.empty()) c.host = host;
      if (port >= 0) c.port = port;
      return serve(c);
    }
  } catch (const UsageError& e) {
    err << "lmd: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StageError& e) {
    err << "lmd: " << to_string(e.stage()) << " stage failed (" << e.code() << "): " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const std::exception& e) {
    err << "lmd: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitUsage;
}

}  // namespace lmd

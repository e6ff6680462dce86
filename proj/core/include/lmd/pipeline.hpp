#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lmd/grounded.hpp"
#include "lmd/layout_dsl.hpp"
#include "lmd/llm_client.hpp"
#include "lmd/prompt.hpp"
#include "lmd/run_store.hpp"

namespace lmd {

enum class Stage { Layout, Image };

[[nodiscard]] std::string_view to_string(Stage stage);

/// Failure of one pipeline stage. `code` is a short machine-readable tag
/// such as "llm_error" or "layout_parse_error".
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, std::string code, const std::string& message,
             std::optional<ParseDiagnostic> diagnostic = std::nullopt)
      : std::runtime_error(message), stage_(stage), code_(std::move(code)),
        diagnostic_(std::move(diagnostic)) {}

  [[nodiscard]] Stage stage() const { return stage_; }
  [[nodiscard]] const std::string& code() const { return code_; }
  [[nodiscard]] const std::optional<ParseDiagnostic>& diagnostic() const { return diagnostic_; }

 private:
  Stage stage_;
  std::string code_;
  std::optional<ParseDiagnostic> diagnostic_;
};

struct LayoutStageResult {
  Layout layout;
  std::string completion;
  ValidationReport validation;
  std::vector<ParseDiagnostic> parse_warnings;
};

/// Caption to validated layout. Throws StageError(Stage::Layout).
[[nodiscard]] LayoutStageResult run_layout_stage(ChatBackend& backend, const LlmConfig& config,
                                                 const PromptTemplate& tmpl, std::string_view caption,
                                                 Canvas canvas = {}, const Sleeper& sleep = {});

struct GenerationResult {
  Layout layout;
  std::vector<ForegroundAsset> assets;
  ComposeResult composed;
  RgbImage image;
};

/// Layout to image on the config's canvas. Throws StageError(Stage::Image).
[[nodiscard]] GenerationResult generate_from_layout(const Layout& layout,
                                                    const GenerationConfig& config,
                                                    int parallelism = 1);

/// Writes layout.json, layout.svg, per-object asset dumps, image.png and
/// image.bin into the run directory; returns the artifact names written.
std::vector<std::string> persist_generation(const RunStore& store, const std::string& run_id,
                                            const GenerationResult& result,
                                            const GenerationConfig& config);

struct PipelineOptions {
  GenerationConfig generation;
  PromptTemplate prompt_template = default_template();
  int parallelism = 1;
  Sleeper sleep;
};

/// Snapshot stored in run.json: generation settings and the LLM settings
/// without the API key.
[[nodiscard]] nlohmann::json config_snapshot(const PipelineOptions& options, const LlmConfig& llm);

/// Caption to persisted run. The record is stored after every stage; on
/// failure it is stored as failed and the StageError is rethrown.
RunRecord run_pipeline(ChatBackend& backend, const LlmConfig& llm, const std::string& caption,
                       const PipelineOptions& options, const RunStore& store,
                       std::optional<RunRecord> record = std::nullopt);

/// Layout to persisted run, skipping the layout stage.
RunRecord run_generation(const Layout& layout, const PipelineOptions& options, const RunStore& store,
                         std::optional<RunRecord> record = std::nullopt);

}  // namespace lmd

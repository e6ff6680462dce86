#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "lmd/grounded.hpp"
#include "lmd/llm_client.hpp"

namespace lmd {

struct AppConfig {
  std::filesystem::path data_dir = "lmd-data";
  LlmConfig llm;
  GenerationConfig generation;
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Upper bound on threads used for one generation and on concurrent
  /// background runs.
  int parallelism = 2;
  /// Value of Access-Control-Allow-Origin; empty disables CORS headers.
  std::string cors_origin = "*";
  /// How long a synchronous generate/pipeline request waits before answering
  /// 202 with the run id.
  std::chrono::milliseconds sync_timeout{120'000};
  /// Serve layouts from the built-in offline backend.
  bool use_mock = false;

  void validate() const;
  /// LMD_DATA_DIR plus the LLM overrides (LMD_API_KEY, LMD_API_BASE, LMD_MODEL).
  [[nodiscard]] AppConfig with_env_overrides() const;
};

/// JSON keys mirror the field names; "llm" and "generation" are nested
/// objects and "sync_timeout_ms" is in milliseconds. Missing keys keep defaults.
void from_json(const nlohmann::json& j, AppConfig& config);
void to_json(nlohmann::json& j, const AppConfig& config);

/// Reads a JSON config file. Throws std::runtime_error with the path on failure.
[[nodiscard]] AppConfig load_app_config(const std::filesystem::path& path);

/// Offline backend: the built-in caption table, then benchmark captions,
/// then an empty layout with the caption as background.
[[nodiscard]] std::shared_ptr<ChatBackend> make_mock_backend();

/// The mock backend when config.use_mock is set, otherwise the HTTP client.
[[nodiscard]] std::shared_ptr<ChatBackend> make_backend(const AppConfig& config);

}  // namespace lmd

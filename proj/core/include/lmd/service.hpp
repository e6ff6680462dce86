#pragma once

#include <memory>
#include <string>

#include "lmd/app_config.hpp"
#include "lmd/llm_client.hpp"

namespace lmd {

/// HTTP API over the layout, generation and benchmark stages.
///
///   POST /v1/layout                  {"caption", "language"?, "backend"?}
///   POST /v1/sessions                {"caption", "language"?, "backend"?}
///   POST /v1/sessions/{id}/turn      {"message"}
///   GET  /v1/sessions/{id}
///   POST /v1/generate[?async=true]   {"layout", "config"?, "seed"?}
///   POST /v1/pipeline[?async=true]   {"caption", "config"?, "seed"?, "language"?, "backend"?}
///   POST /v1/benchmark/run           {"kind" | "kinds", "n"?, "seed"?, "backend"?}
///   GET  /v1/runs/{id}
///   GET  /v1/runs/{id}/image.png
///   GET  /v1/runs/{id}/layout.svg
///   GET  /v1/health
///
/// "backend" is "mock" or "live"; the default follows AppConfig::use_mock.
/// Errors are {"error": {"code": ..., "message": ...}}.
class Service {
 public:
  /// `live` answers "live" requests; the offline mock answers "mock" ones.
  /// Creates the data directory.
  Service(AppConfig config, std::shared_ptr<ChatBackend> live,
          std::shared_ptr<ChatBackend> mock = nullptr);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to config.host:config.port (port 0 picks a free port). Throws
  /// std::runtime_error on bind failure. Returns the bound port.
  int bind();
  /// Serves until stop() is called.
  void listen();
  /// Stops accepting requests and waits for background runs to finish.
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

  [[nodiscard]] int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs the service until SIGINT or SIGTERM, then shuts down gracefully.
/// Returns a process exit code.
int serve(const AppConfig& config);

}  // namespace lmd

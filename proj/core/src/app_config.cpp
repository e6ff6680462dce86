#include "lmd/app_config.hpp"

#include <cstdlib>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lmd/benchmark.hpp"
#include "lmd/mock_llm.hpp"
#include "lmd/run_store.hpp"

namespace lmd {

void AppConfig::validate() const {
  llm.validate();
  generation.validate();
  if (data_dir.empty()) {
    throw std::invalid_argument("data_dir must not be empty");
  }
  if (port < 0 || port > 65535) {
    throw std::invalid_argument("port must lie in [0, 65535]");
  }
  if (parallelism < 1) {
    throw std::invalid_argument("parallelism must be >= 1");
  }
  if (sync_timeout.count() < 0) {
    throw std::invalid_argument("sync_timeout must be non-negative");
  }
}

AppConfig AppConfig::with_env_overrides() const {
  AppConfig c = *this;
  c.llm = llm.with_env_overrides();
  if (const char* dir = std::getenv("LMD_DATA_DIR"); dir != nullptr && *dir != '\0') {
    c.data_dir = dir;
  }
  return c;
}

void from_json(const nlohmann::json& j, AppConfig& config) {
  if (!j.is_object()) {
    throw std::invalid_argument("config must be a JSON object");
  }
  AppConfig c;
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("llm")) c.llm = j.at("llm").get<LlmConfig>();
  if (j.contains("generation")) j.at("generation").get_to(c.generation);
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.parallelism = j.value("parallelism", c.parallelism);
  c.cors_origin = j.value("cors_origin", c.cors_origin);
  c.sync_timeout = std::chrono::milliseconds(j.value("sync_timeout_ms", c.sync_timeout.count()));
  c.use_mock = j.value("use_mock", c.use_mock);
  c.validate();
  config = std::move(c);
}

void to_json(nlohmann::json& j, const AppConfig& c) {
  j = nlohmann::json{{"data_dir", c.data_dir.string()},
                     {"llm", c.llm},
                     {"generation", c.generation},
                     {"host", c.host},
                     {"port", c.port},
                     {"parallelism", c.parallelism},
                     {"cors_origin", c.cors_origin},
                     {"sync_timeout_ms", c.sync_timeout.count()},
                     {"use_mock", c.use_mock}};
}

AppConfig load_app_config(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path)).get<AppConfig>();
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot load config " + path.string() + ": " + e.what());
  }
}

std::shared_ptr<ChatBackend> make_mock_backend() {
  auto echo = std::make_shared<EchoBackgroundLlm>();
  auto oracle = std::make_shared<BenchmarkOracleLlm>(std::move(echo));
  return std::make_shared<MockLlm>(default_mock_entries(), std::move(oracle));
}

std::shared_ptr<ChatBackend> make_backend(const AppConfig& config) {
  if (config.use_mock) {
    return make_mock_backend();
  }
  return std::make_shared<HttpChatBackend>();
}

}  // namespace lmd

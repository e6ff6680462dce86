#include "lmd/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "lmd/layout.hpp"

namespace lmd {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw std::invalid_argument("unknown chat role: " + std::string(name));
}

ChatMessage ChatMessage::make(Role role, std::string content) {
  if (content.empty()) {
    throw std::invalid_argument("chat message content must not be empty");
  }
  return ChatMessage{role, std::move(content)};
}

void to_json(nlohmann::json& j, const ChatMessage& message) {
  j = nlohmann::json{{"role", to_string(message.role)}, {"content", message.content}};
}

void from_json(const nlohmann::json& j, ChatMessage& message) {
  message = ChatMessage::make(role_from_string(j.at("role").get<std::string>()),
                              j.at("content").get<std::string>());
}

void LlmConfig::validate() const {
  if (max_retries < 0) {
    throw std::invalid_argument("max_retries must be >= 0");
  }
  if (temperature < 0.0) {
    throw std::invalid_argument("temperature must be >= 0");
  }
  if (timeout.count() <= 0) {
    throw std::invalid_argument("timeout must be positive");
  }
}

LlmConfig LlmConfig::with_env_overrides() const {
  LlmConfig out = *this;
  if (const char* key = std::getenv("LMD_API_KEY"); key != nullptr && *key != '\0') {
    out.api_key = key;
  }
  if (const char* base = std::getenv("LMD_API_BASE"); base != nullptr && *base != '\0') {
    out.endpoint_url = base;
  }
  if (const char* model = std::getenv("LMD_MODEL"); model != nullptr && *model != '\0') {
    out.model_name = model;
  }
  return out;
}

void to_json(nlohmann::json& j, const LlmConfig& config) {
  j = nlohmann::json{{"endpoint_url", config.endpoint_url},
                     {"model_name", config.model_name},
                     {"temperature", config.temperature},
                     {"timeout_ms", config.timeout.count()},
                     {"max_retries", config.max_retries},
                     {"initial_backoff_ms", config.initial_backoff.count()},
                     {"system_role_prompt", config.system_role_prompt}};
}

void from_json(const nlohmann::json& j, LlmConfig& config) {
  LlmConfig c;
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.model_name = j.value("model_name", c.model_name);
  c.api_key = j.value("api_key", c.api_key);
  c.temperature = j.value("temperature", c.temperature);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.max_retries = j.value("max_retries", c.max_retries);
  c.initial_backoff =
      std::chrono::milliseconds(j.value("initial_backoff_ms", c.initial_backoff.count()));
  c.system_role_prompt = j.value("system_role_prompt", c.system_role_prompt);
  c.validate();
  config = std::move(c);
}

nlohmann::json make_chat_request(std::span<const ChatMessage> messages, const LlmConfig& config) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    msgs.push_back(m);
  }
  return nlohmann::json{
      {"model", config.model_name}, {"messages", msgs}, {"temperature", config.temperature}};
}

std::string read_chat_response(int status, const std::string& body) {
  const auto parsed = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw ApiError(status, body);
  }
  try {
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ApiError(status, body);
  }
}

std::string complete_with_retries(ChatBackend& backend, std::span<const ChatMessage> messages,
                                  const LlmConfig& config, const Sleeper& sleep) {
  config.validate();
  const Sleeper do_sleep = sleep ? sleep : [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
  auto backoff = config.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    const bool can_retry = attempt < config.max_retries;
    try {
      return backend.complete(messages, config);
    } catch (const RateLimited& e) {
      if (!can_retry) throw;
      do_sleep(std::max(backoff, e.retry_after().value_or(std::chrono::milliseconds{0})));
    } catch (const TransportError&) {
      if (!can_retry) throw;
      do_sleep(backoff);
    } catch (const ApiError& e) {
      if (!can_retry || e.status() < 500) throw;
      do_sleep(backoff);
    }
    backoff *= 2;
  }
}

std::vector<ChatMessage> layout_request_messages(const LlmConfig& config, std::string_view prompt) {
  if (config.system_role_prompt) {
    const auto cue = prompt.rfind("Caption: ");
    if (cue != std::string_view::npos && cue > 0) {
      const std::string instructions = trim(prompt.substr(0, cue));
      if (!instructions.empty()) {
        return {ChatMessage::make(Role::System, instructions),
                ChatMessage::make(Role::User, std::string(prompt.substr(cue)))};
      }
    }
  }
  return {ChatMessage::make(Role::User, std::string(prompt))};
}

RawCompletion request_layout(ChatBackend& backend, const LlmConfig& config, std::string_view prompt,
                             const Sleeper& sleep) {
  const auto messages = layout_request_messages(config, prompt);
  return RawCompletion{complete_with_retries(backend, messages, config, sleep)};
}

}  // namespace lmd

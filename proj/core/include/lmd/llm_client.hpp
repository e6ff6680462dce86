#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/layout_dsl.hpp"

namespace lmd {

enum class Role { System, User, Assistant };

[[nodiscard]] std::string_view to_string(Role role);
[[nodiscard]] Role role_from_string(std::string_view name);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  /// Rejects empty content.
  static ChatMessage make(Role role, std::string content);

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

void to_json(nlohmann::json& j, const ChatMessage& message);
void from_json(const nlohmann::json& j, ChatMessage& message);

struct LlmConfig {
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-3.5-turbo";
  std::string api_key;  // never logged or serialized
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  /// Send the instructions and examples as a system message and only the
  /// final "Caption: ..." cue as the user message.
  bool system_role_prompt = false;

  /// Throws std::invalid_argument on negative retries or temperature.
  void validate() const;

  /// Applies LMD_API_KEY, LMD_API_BASE and LMD_MODEL over the given values.
  [[nodiscard]] LlmConfig with_env_overrides() const;
};

/// Config snapshot without the API key.
void to_json(nlohmann::json& j, const LlmConfig& config);
void from_json(const nlohmann::json& j, LlmConfig& config);

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network failure or timeout.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

/// HTTP 429. `retry_after` carries the server's Retry-After hint when present.
class RateLimited : public LlmError {
 public:
  RateLimited(const std::string& message, std::optional<std::chrono::milliseconds> retry_after)
      : LlmError(message), retry_after_(retry_after) {}

  [[nodiscard]] std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }

 private:
  std::optional<std::chrono::milliseconds> retry_after_;
};

/// Non-2xx response other than 429, or an unusable 2xx body.
class ApiError : public LlmError {
 public:
  ApiError(int status, std::string body)
      : LlmError("chat completion API returned HTTP " + std::to_string(status)),
        status_(status),
        body_(std::move(body)) {}

  [[nodiscard]] int status() const { return status_; }
  [[nodiscard]] const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

/// One chat-completion round trip: message history in, assistant text out.
/// Implementations must be safe to call concurrently.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) = 0;
};

/// Builds the request body {"model", "messages", "temperature"}.
[[nodiscard]] nlohmann::json make_chat_request(std::span<const ChatMessage> messages,
                                               const LlmConfig& config);

/// Reads choices[0].message.content; throws ApiError(status, body) when absent.
[[nodiscard]] std::string read_chat_response(int status, const std::string& body);

/// Live OpenAI-compatible backend over HTTP(S). Does not retry on its own.
class HttpChatBackend final : public ChatBackend {
 public:
  std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) override;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Calls the backend, retrying transport failures, 429s and 5xx responses up
/// to config.max_retries times with exponential backoff.
std::string complete_with_retries(ChatBackend& backend, std::span<const ChatMessage> messages,
                                  const LlmConfig& config, const Sleeper& sleep = {});

/// The messages used for a single layout request.
[[nodiscard]] std::vector<ChatMessage> layout_request_messages(const LlmConfig& config,
                                                               std::string_view prompt);

/// Sends one prompt and returns the verbatim completion.
RawCompletion request_layout(ChatBackend& backend, const LlmConfig& config, std::string_view prompt,
                             const Sleeper& sleep = {});

}  // namespace lmd

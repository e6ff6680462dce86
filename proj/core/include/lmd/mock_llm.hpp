#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <regex>
#include <string>
#include <variant>
#include <vector>

#include "lmd/llm_client.hpp"

namespace lmd {

/// The text a mock keys on: the caption after the last "Caption: " in the
/// final user message, or the whole message when there is no such cue
/// (dialog instructions).
[[nodiscard]] std::string mock_lookup_key(std::span<const ChatMessage> messages);

/// Table-driven offline backend: the first entry whose pattern matches the
/// lookup key supplies the completion. Unmatched keys go to the fallback
/// backend, or raise ApiError(404) when there is none.
class MockLlm final : public ChatBackend {
 public:
  struct Entry {
    std::regex pattern;
    std::string completion;
  };

  explicit MockLlm(std::vector<Entry> entries, std::shared_ptr<ChatBackend> fallback = nullptr);

  /// Entry whose pattern matches exactly `caption`.
  static Entry exact(std::string_view caption, std::string completion);
  /// Case-insensitive ECMAScript search pattern.
  static Entry search(const std::string& pattern, std::string completion);

  std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) override;

  [[nodiscard]] std::size_t calls() const;

 private:
  std::vector<Entry> entries_;
  std::shared_ptr<ChatBackend> fallback_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

/// Replays a fixed script of completions or errors, one per call, and keeps
/// every request it saw.
class ScriptedLlm final : public ChatBackend {
 public:
  using Step = std::variant<std::string, TransportError, RateLimited, ApiError>;

  explicit ScriptedLlm(std::vector<Step> script);

  std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) override;

  [[nodiscard]] std::vector<std::vector<ChatMessage>> requests() const;

 private:
  std::deque<Step> script_;
  std::vector<std::vector<ChatMessage>> requests_;
  mutable std::mutex mutex_;
};

/// Built-in table: the panda and skier examples, an "add a dog" dialog turn,
/// and a two-shape scene. Unmatched captions fall through to `fallback`.
[[nodiscard]] std::vector<MockLlm::Entry> default_mock_entries();

/// Completion text for a layout, in the form an LLM emits after "Objects: ".
[[nodiscard]] std::string completion_for(const Layout& layout);

/// Catch-all backend that answers any caption with an empty object list and
/// the caption as background prompt.
class EchoBackgroundLlm final : public ChatBackend {
 public:
  std::string complete(std::span<const ChatMessage> messages, const LlmConfig& config) override;
};

}  // namespace lmd

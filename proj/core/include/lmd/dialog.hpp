#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmd/layout_dsl.hpp"
#include "lmd/llm_client.hpp"
#include "lmd/prompt.hpp"

namespace lmd {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

[[nodiscard]] Timestamp now_ms();
/// "2026-10-16T14:09:00.123Z"
[[nodiscard]] std::string format_timestamp(Timestamp ts);
[[nodiscard]] Timestamp parse_timestamp(const std::string& text);

/// 32 lowercase hex characters from a process-wide random source.
[[nodiscard]] std::string make_unique_id();

/// Multi-round layout conversation. The first user message carries the full
/// in-context prompt; afterwards user and assistant turns alternate.
/// `current_layout` is the parse of the last assistant message, absent when
/// that message did not parse (see `last_diagnostic`).
struct DialogSession {
  std::string id;
  std::vector<ChatMessage> messages;
  std::optional<Layout> current_layout;
  std::optional<ParseDiagnostic> last_diagnostic;
  Canvas canvas;
  Timestamp created_at{};
  Timestamp updated_at{};
};

void to_json(nlohmann::json& j, const DialogSession& session);

/// Extract-then-parse of one assistant reply.
[[nodiscard]] ParseResult parse_completion(std::string_view completion, Canvas canvas);

/// Sends the initial prompt for `caption`. Transport/API errors propagate;
/// a reply that does not parse yields a session without a layout.
[[nodiscard]] DialogSession start_session(ChatBackend& backend, const LlmConfig& config,
                                          const PromptTemplate& tmpl, std::string_view caption,
                                          Canvas canvas = {}, const Sleeper& sleep = {});

/// Appends `instruction`, queries with the full history, and re-parses. On
/// error the input session is left untouched.
[[nodiscard]] DialogSession dialog_turn(ChatBackend& backend, const LlmConfig& config,
                                        const DialogSession& session, std::string_view instruction,
                                        const Sleeper& sleep = {});

/// Layouts of every assistant turn that parsed, oldest first.
[[nodiscard]] std::vector<Layout> layout_history(const DialogSession& session);

/// In-memory sessions with exclusive access per session id.
class SessionStore {
 public:
  void put(DialogSession session);
  [[nodiscard]] std::optional<DialogSession> get(const std::string& id) const;

  /// Runs `fn` on the stored session while holding that session's lock and
  /// stores its result. Returns nullopt when the id is unknown.
  std::optional<DialogSession> update(
      const std::string& id, const std::function<DialogSession(const DialogSession&)>& fn);

  [[nodiscard]] std::size_t size() const;

 private:
  struct Slot {
    std::mutex mutex;
    DialogSession session;
  };
  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace lmd

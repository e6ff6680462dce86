#include "lmd/dialog.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <ctime>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lmd {

Timestamp now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp ts) {
  const auto secs = std::chrono::floor<std::chrono::seconds>(ts);
  const auto millis = (ts - secs).count();
  const std::time_t t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02d-%02dT%02d:%02d:%02d.%03lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(millis));
  return buf.data();
}

Timestamp parse_timestamp(const std::string& text) {
  std::tm tm{};
  int millis = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon,
                  &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &millis) != 7) {
    throw std::invalid_argument("malformed timestamp: " + text);
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t t = timegm(&tm);
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::from_time_t(t)) +
         std::chrono::milliseconds(millis);
}

std::string make_unique_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{[] {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }()};
  static std::uint64_t counter = 0;
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  {
    std::lock_guard lock(mutex);
    hi = rng();
    lo = rng() ^ ++counter;
  }
  std::array<char, 33> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf.data();
}

void to_json(nlohmann::json& j, const DialogSession& session) {
  j = nlohmann::json{{"id", session.id},
                     {"messages", session.messages},
                     {"current_layout", nullptr},
                     {"diagnostic", nullptr},
                     {"created_at", format_timestamp(session.created_at)},
                     {"updated_at", format_timestamp(session.updated_at)}};
  if (session.current_layout) {
    j["current_layout"] = *session.current_layout;
  }
  if (session.last_diagnostic) {
    const auto& d = *session.last_diagnostic;
    j["diagnostic"] = {{"kind", to_string(d.kind)},
                       {"span", {d.begin, d.end}},
                       {"message", d.message}};
  }
}

ParseResult parse_completion(std::string_view completion, Canvas canvas) {
  auto block = extract_layout_block(completion);
  if (auto* diag = std::get_if<ParseDiagnostic>(&block)) {
    return ParseResult::failure(*diag);
  }
  return parse_layout(std::get<RawCompletion>(block), canvas);
}

namespace {

void absorb_reply(DialogSession& session, std::string reply) {
  ParseResult parsed = parse_completion(reply, session.canvas);
  // An empty reply is still recorded so the history keeps alternating.
  session.messages.push_back(ChatMessage{Role::Assistant, std::move(reply)});
  if (parsed.ok()) {
    session.current_layout = parsed.layout();
    session.last_diagnostic.reset();
  } else {
    session.current_layout.reset();
    session.last_diagnostic = parsed.error();
  }
  session.updated_at = now_ms();
}

}  // namespace

DialogSession start_session(ChatBackend& backend, const LlmConfig& config,
                            const PromptTemplate& tmpl, std::string_view caption, Canvas canvas,
                            const Sleeper& sleep) {
  DialogSession session;
  session.id = make_unique_id();
  session.canvas = canvas;
  session.messages = layout_request_messages(config, build_prompt(tmpl, caption));
  session.created_at = now_ms();
  std::string reply = complete_with_retries(backend, session.messages, config, sleep);
  absorb_reply(session, std::move(reply));
  return session;
}

DialogSession dialog_turn(ChatBackend& backend, const LlmConfig& config,
                          const DialogSession& session, std::string_view instruction,
                          const Sleeper& sleep) {
  if (trim(instruction).empty()) {
    throw std::invalid_argument("dialog instruction must not be empty");
  }
  DialogSession next = session;
  next.messages.push_back(ChatMessage::make(Role::User, std::string(instruction)));
  std::string reply = complete_with_retries(backend, next.messages, config, sleep);
  absorb_reply(next, std::move(reply));
  return next;
}

std::vector<Layout> layout_history(const DialogSession& session) {
  std::vector<Layout> out;
  for (const auto& m : session.messages) {
    if (m.role != Role::Assistant) {
      continue;
    }
    if (auto parsed = parse_completion(m.content, session.canvas); parsed.ok()) {
      out.push_back(parsed.layout());
    }
  }
  return out;
}

void SessionStore::put(DialogSession session) {
  auto slot = std::make_shared<Slot>();
  slot->session = std::move(session);
  std::lock_guard lock(map_mutex_);
  slots_[slot->session.id] = std::move(slot);
}

std::optional<DialogSession> SessionStore::get(const std::string& id) const {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(map_mutex_);
    const auto it = slots_.find(id);
    if (it == slots_.end()) {
      return std::nullopt;
    }
    slot = it->second;
  }
  std::lock_guard lock(slot->mutex);
  return slot->session;
}

std::optional<DialogSession> SessionStore::update(
    const std::string& id, const std::function<DialogSession(const DialogSession&)>& fn) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(map_mutex_);
    const auto it = slots_.find(id);
    if (it == slots_.end()) {
      return std::nullopt;
    }
    slot = it->second;
  }
  std::lock_guard lock(slot->mutex);
  slot->session = fn(slot->session);
  return slot->session;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(map_mutex_);
  return slots_.size();
}

}  // namespace lmd

#include "lmd/mock_llm.hpp"

#include "lmd/prompt.hpp"

namespace lmd {

namespace {

std::string escape_regex(std::string_view text) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (const char c : text) {
    if (special.find(c) != std::string::npos) {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string mock_lookup_key(std::span<const ChatMessage> messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role != Role::User) {
      continue;
    }
    const std::string& content = it->content;
    const auto cue = content.rfind("Caption: ");
    if (cue == std::string::npos) {
      return trim(content);
    }
    const auto begin = cue + std::string_view("Caption: ").size();
    const auto end = content.find('\n', begin);
    return trim(std::string_view(content).substr(begin, end == std::string::npos ? std::string::npos : end - begin));
  }
  return {};
}

MockLlm::MockLlm(std::vector<Entry> entries, std::shared_ptr<ChatBackend> fallback)
    : entries_(std::move(entries)), fallback_(std::move(fallback)) {}

MockLlm::Entry MockLlm::exact(std::string_view caption, std::string completion) {
  return Entry{std::regex("^" + escape_regex(caption) + "$"), std::move(completion)};
}

MockLlm::Entry MockLlm::search(const std::string& pattern, std::string completion) {
  return Entry{std::regex(pattern, std::regex::ECMAScript | std::regex::icase), std::move(completion)};
}

std::string MockLlm::complete(std::span<const ChatMessage> messages, const LlmConfig& config) {
  {
    std::lock_guard lock(mutex_);
    ++calls_;
  }
  const std::string key = mock_lookup_key(messages);
  for (const auto& entry : entries_) {
    if (std::regex_search(key, entry.pattern)) {
      return entry.completion;
    }
  }
  if (fallback_) {
    return fallback_->complete(messages, config);
  }
  throw ApiError(404, R"({"error":{"message":"mock has no completion for this caption"}})");
}

std::size_t MockLlm::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

ScriptedLlm::ScriptedLlm(std::vector<Step> script) : script_(script.begin(), script.end()) {}

std::string ScriptedLlm::complete(std::span<const ChatMessage> messages, const LlmConfig&) {
  Step step;
  {
    std::lock_guard lock(mutex_);
    requests_.emplace_back(messages.begin(), messages.end());
    if (script_.empty()) {
      throw ApiError(500, R"({"error":{"message":"scripted mock exhausted"}})");
    }
    step = std::move(script_.front());
    script_.pop_front();
  }
  return std::visit(
      [](auto&& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return s;
        } else {
          throw s;
        }
      },
      std::move(step));
}

std::vector<std::vector<ChatMessage>> ScriptedLlm::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::string completion_for(const Layout& layout) {
  return serialize_objects(layout.objects) + "\nBackground prompt: " + layout.background_prompt;
}

std::vector<MockLlm::Entry> default_mock_entries() {
  const Layout pandas = panda_example().layout;
  Layout pandas_and_dog = pandas;
  pandas_and_dog.objects.push_back(ObjectSpec::make("a dog", {400, 380, 100, 100}));
  const Layout shapes = Layout::make({ObjectSpec::make("a red circle", {48, 160, 176, 176}),
                                      ObjectSpec::make("a blue square", {288, 160, 176, 176})},
                                     "A realistic image of a gray room");
  return {
      MockLlm::search(R"(\badd\b.*\bdog\b)", completion_for(pandas_and_dog)),
      MockLlm::search("panda", completion_for(pandas)),
      MockLlm::search("skier", completion_for(skier_example().layout)),
      MockLlm::search(R"(circle|square)", completion_for(shapes)),
  };
}

std::string EchoBackgroundLlm::complete(std::span<const ChatMessage> messages, const LlmConfig&) {
  std::string key = mock_lookup_key(messages);
  if (key.empty()) {
    key = "an empty scene";
  }
  return "[]\nBackground prompt: " + key;
}

}  // namespace lmd

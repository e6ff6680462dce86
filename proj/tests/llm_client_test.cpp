#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lmd/llm_client.hpp"
#include "lmd/mock_llm.hpp"
#include "lmd/prompt.hpp"

using namespace lmd;
using namespace std::chrono_literals;

namespace {

const std::string kPandaCompletion =
    "[('a panda eating bambooo', [30, 133, 212, 226]), ('a panda eating bambooo', [262, 137, 222, "
    "221])]\nBackground prompt: A watercolor painting of a forest";

std::string chat_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::vector<ChatMessage> one_message() { return {ChatMessage::make(Role::User, "hello")}; }

auto no_sleep() {
  return [](std::chrono::milliseconds) {};
}

}  // namespace

TEST(ChatMessage, RejectsEmptyContent) {
  EXPECT_THROW((void)ChatMessage::make(Role::User, ""), std::invalid_argument);
  EXPECT_EQ(role_from_string("assistant"), Role::Assistant);
  EXPECT_ANY_THROW((void)role_from_string("robot"));
}

TEST(LlmConfig, Validate) {
  LlmConfig c;
  c.max_retries = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LlmConfig{};
  c.temperature = -0.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(LlmConfig, JsonOmitsApiKey) {
  LlmConfig c;
  c.api_key = "sk-secret";
  const nlohmann::json j = c;
  EXPECT_EQ(j.dump().find("sk-secret"), std::string::npos);
}

TEST(ChatRequest, Body) {
  LlmConfig c;
  c.model_name = "m";
  c.temperature = 0.25;
  const auto msgs = one_message();
  const nlohmann::json body = make_chat_request(msgs, c);
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_DOUBLE_EQ(body.at("temperature").get<double>(), 0.25);
  EXPECT_EQ(body.at("messages").at(0).at("role"), "user");
  EXPECT_EQ(body.at("messages").at(0).at("content"), "hello");
}

TEST(ChatResponse, MissingContentIsApiError) {
  EXPECT_EQ(read_chat_response(200, chat_body("hi")), "hi");
  EXPECT_THROW((void)read_chat_response(200, "{}"), ApiError);
  EXPECT_THROW((void)read_chat_response(200, "not json"), ApiError);
}

TEST(MockLlm, ReturnsCannedCompletionVerbatim) {
  MockLlm mock({MockLlm::search("panda", kPandaCompletion)});
  const std::string prompt = build_prompt(default_template(), "two pandas in a forest");
  const RawCompletion raw = request_layout(mock, LlmConfig{}, prompt);
  EXPECT_EQ(raw.text, kPandaCompletion);
  EXPECT_EQ(mock.calls(), 1u);
}

TEST(MockLlm, UnmatchedWithoutFallbackIs404) {
  MockLlm mock({MockLlm::exact("a", "b")});
  try {
    (void)mock.complete(one_message(), LlmConfig{});
    FAIL() << "expected ApiError";
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 404);
  }
}

TEST(Retries, ScriptedRateLimitThenSuccess) {
  ScriptedLlm llm({RateLimited("slow down", 2000ms), std::string("ok")});
  LlmConfig c;
  c.max_retries = 1;
  std::vector<std::chrono::milliseconds> sleeps;
  const std::string out = complete_with_retries(llm, one_message(), c,
                                                [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  EXPECT_EQ(out, "ok");
  ASSERT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(sleeps[0], 2000ms);
}

TEST(Retries, ExhaustedRetriesRethrow) {
  ScriptedLlm llm({TransportError("down"), TransportError("down"), std::string("late")});
  LlmConfig c;
  c.max_retries = 1;
  EXPECT_THROW((void)complete_with_retries(llm, one_message(), c, no_sleep()), TransportError);
}

TEST(Retries, ClientErrorsAreNotRetried) {
  ScriptedLlm llm({ApiError(400, "bad"), std::string("ok")});
  LlmConfig c;
  c.max_retries = 3;
  EXPECT_THROW((void)complete_with_retries(llm, one_message(), c, no_sleep()), ApiError);
  EXPECT_EQ(llm.requests().size(), 1u);
}

TEST(Retries, ServerErrorsAreRetriedWithBackoff) {
  ScriptedLlm llm({ApiError(503, ""), ApiError(500, ""), std::string("ok")});
  LlmConfig c;
  c.max_retries = 3;
  c.initial_backoff = 10ms;
  std::vector<std::chrono::milliseconds> sleeps;
  EXPECT_EQ(complete_with_retries(llm, one_message(), c,
                                  [&](std::chrono::milliseconds d) { sleeps.push_back(d); }),
            "ok");
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{10ms, 20ms}));
}

TEST(SystemRolePrompt, SplitsAtFinalCaption) {
  LlmConfig c;
  c.system_role_prompt = true;
  const std::string prompt = build_prompt(default_template(), "a cat");
  const auto msgs = layout_request_messages(c, prompt);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, Role::System);
  EXPECT_EQ(msgs[1].content, "Caption: a cat\nObjects: ");
}

TEST(HttpChatBackend, RateLimitedThenSuccess) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    EXPECT_EQ(body.at("model"), "test-model");
    EXPECT_EQ(req.get_header_value("Authorization"), "Bearer k");
    if (hits++ == 0) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      res.set_content("{}", "application/json");
      return;
    }
    res.set_content(chat_body(kPandaCompletion), "application/json");
  });
  LlmConfig c;
  c.endpoint_url = server.url();
  c.model_name = "test-model";
  c.api_key = "k";
  c.max_retries = 1;
  c.initial_backoff = 1ms;
  HttpChatBackend backend;
  EXPECT_EQ(complete_with_retries(backend, one_message(), c, no_sleep()), kPandaCompletion);
  EXPECT_EQ(hits.load(), 2);
}

TEST(HttpChatBackend, RateLimitWithoutRetriesSurfaces) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  LlmConfig c;
  c.endpoint_url = server.url();
  c.max_retries = 0;
  HttpChatBackend backend;
  EXPECT_THROW((void)complete_with_retries(backend, one_message(), c, no_sleep()), RateLimited);
}

TEST(HttpChatBackend, ServerErrorCarriesStatusAndBody) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("no key", "text/plain");
  });
  LlmConfig c;
  c.endpoint_url = server.url();
  HttpChatBackend backend;
  try {
    (void)backend.complete(one_message(), c);
    FAIL() << "expected ApiError";
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(e.body(), "no key");
  }
}

TEST(HttpChatBackend, UnreachableEndpointIsTransportError) {
  // Bind and release a port so nothing is listening on it.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  LlmConfig c;
  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  c.max_retries = 0;
  c.timeout = 2000ms;
  HttpChatBackend backend;
  EXPECT_THROW((void)complete_with_retries(backend, one_message(), c, no_sleep()), TransportError);
}

TEST(HttpChatBackend, EndpointWithoutSchemeIsTransportError) {
  LlmConfig c;
  c.endpoint_url = "localhost:1";
  HttpChatBackend backend;
  EXPECT_THROW((void)backend.complete(one_message(), c), TransportError);
}

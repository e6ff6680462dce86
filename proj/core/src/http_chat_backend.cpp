#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lmd/llm_client.hpp"

namespace lmd {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // .../chat/completions
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw TransportError("endpoint URL needs a scheme: " + url);
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_begin);
  std::string path = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!path.empty() && path.back() == '/') {
    path.pop_back();
  }
  constexpr std::string_view suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path += suffix;
  }
  ep.path = path;
  return ep;
}

std::optional<std::chrono::milliseconds> parse_retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) {
    return std::nullopt;
  }
  try {
    const double seconds = std::stod(res.get_header_value("Retry-After"));
    if (seconds >= 0.0) {
      return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
    }
  } catch (const std::exception&) {
    // HTTP-date form is not supported; fall back to our own backoff.
  }
  return std::nullopt;
}

}  // namespace

std::string HttpChatBackend::complete(std::span<const ChatMessage> messages, const LlmConfig& config) {
  const Endpoint ep = split_endpoint(config.endpoint_url);
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config.api_key);
  }
  const std::string body = make_chat_request(messages, config).dump();
  auto res = client.Post(ep.path, headers, body, "application/json");
  if (!res) {
    throw TransportError("chat completion request to " + ep.origin +
                         " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429) {
    throw RateLimited("chat completion API rate limited the request", parse_retry_after(*res));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ApiError(res->status, res->body);
  }
  return read_chat_response(res->status, res->body);
}

}  // namespace lmd

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "selfevo/embedding.hpp"
#include "selfevo/error.hpp"
#include "selfevo/llm.hpp"

namespace selfevo {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::precondition, "endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string api_key(const std::string& env_name) {
  if (env_name.empty()) return {};
  const char* value = std::getenv(env_name.c_str());
  return value ? std::string(value) : std::string();
}

/// POSTs a JSON body and returns the parsed response. Connection failures,
/// 408, 429 and 5xx are retryable; other non-2xx statuses are not.
json post_json(const std::string& url, const std::string& key_env, std::chrono::milliseconds timeout,
               const json& body) {
  const Endpoint ep = split_url(url);
  httplib::Client client(ep.origin);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (auto key = api_key(key_env); !key.empty()) headers.emplace("Authorization", "Bearer " + key);

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("request to " + ep.origin + " failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status < 200 || res->status >= 300) {
    const bool retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + url + ": " + res->body.substr(0, 200),
                       retryable);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed response body: ") + e.what(), false);
  }
}

}  // namespace

namespace llm {

HttpChatBackend::HttpChatBackend(Options options) : options_(std::move(options)) {
  split_url(options_.url);
}

json HttpChatBackend::request_body(std::span<const ChatMessage> messages, const GenerationParams& params) const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {
      {"model", options_.model},
      {"messages", std::move(msgs)},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"top_k", params.top_k},
      {"repetition_penalty", params.repetition_penalty},
      {"max_tokens", params.max_tokens},
  };
}

std::string HttpChatBackend::complete(std::span<const ChatMessage> messages, const GenerationParams& params) {
  const json res = post_json(options_.url, options_.api_key_env, options_.timeout, request_body(messages, params));
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw BackendError("response has no choices[0].message.content", false);
  }
}

}  // namespace llm

namespace metrics {

std::vector<Vector> HttpEmbedder::embed(const std::vector<std::string>& tokens) {
  if (tokens.empty()) return {};
  try {
    const json res = post_json(options_.url, options_.api_key_env, options_.timeout,
                               {{"model", options_.model}, {"input", tokens}});
    const auto& data = res.at("data");
    if (data.size() != tokens.size()) throw Error(Errc::unavailable, "embedding count mismatch");
    std::vector<Vector> out;
    out.reserve(tokens.size());
    for (const auto& item : data) out.push_back(normalized(item.at("embedding").get<Vector>()));
    return out;
  } catch (const BackendError& e) {
    throw Error(Errc::unavailable, std::string("embedder: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(Errc::unavailable, std::string("embedder: ") + e.what());
  }
}

}  // namespace metrics
}  // namespace selfevo

#pragma once

// OpenAI-compatible chat-completion client over plain HTTP.

#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/llm/backend.hpp"

namespace letspi::llm {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::ConfigError, "URL without scheme: " + url);
  if (url.compare(0, scheme, "http") != 0) throw Error(ErrorCode::ConfigError, "only http:// URLs are supported");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// Walks "a/0/b" style paths through objects and arrays.
inline const nlohmann::json* follow_path(const nlohmann::json& j, const std::string& path) {
  const nlohmann::json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = path.find('/', start);
    const std::string key = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!key.empty()) {
      if (cur->is_array()) {
        char* stop = nullptr;
        const unsigned long idx = std::strtoul(key.c_str(), &stop, 10);
        if (*stop != '\0' || idx >= cur->size()) return nullptr;
        cur = &(*cur)[idx];
      } else if (cur->is_object()) {
        auto it = cur->find(key);
        if (it == cur->end()) return nullptr;
        cur = &*it;
      } else {
        return nullptr;
      }
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return cur;
}

class HttpBackend : public Backend {
 public:
  HttpBackend(std::string url, std::string response_path = "choices/0/message/content", int max_concurrency = 4)
      : Backend(max_concurrency), url_(split_url(url)), response_path_(std::move(response_path)) {}

  std::string send(const ChatRequest& req) override {
    httplib::Client client(url_.origin);
    const auto secs = static_cast<time_t>(req.timeout_s);
    const auto usecs = static_cast<time_t>((req.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(url_.path, chat_body(req).dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
        throw Error(ErrorCode::Timeout, "request to " + url_.origin + " timed out (" + httplib::to_string(err) + ")");
      throw Error(ErrorCode::TransportFailure, "request to " + url_.origin + " failed: " + httplib::to_string(err));
    }
    if (res->status >= 500) throw Error(ErrorCode::TransportFailure, "server error " + std::to_string(res->status));
    if (res->status >= 400) throw Error(ErrorCode::BackendRefusal, "request refused with " + std::to_string(res->status));

    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw Error(ErrorCode::BackendRefusal, "response body is not JSON");
    const nlohmann::json* content = follow_path(body, response_path_);
    if (!content || !content->is_string())
      throw Error(ErrorCode::BackendRefusal, "response has no text at '" + response_path_ + "'");
    return content->get<std::string>();
  }

  std::string name() const override { return "http"; }

 private:
  ParsedUrl url_;
  std::string response_path_;
};

}  // namespace letspi::llm

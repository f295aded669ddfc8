#pragma once

// Chat-completion backends behind one interface, plus the retrying
// `complete` entry point. Requests always carry temperature 0.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "letspi/error.hpp"
#include "letspi/llm/prompt.hpp"

namespace letspi::llm {

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  PromptKind kind{PromptKind::PhysicsInformed};
  double temperature{0.0};
  double timeout_s{60.0};
};

inline nlohmann::json chat_body(const ChatRequest& r) {
  return {{"model", r.model},
          {"messages", nlohmann::json::array({{{"role", "system"}, {"content", r.system}},
                                              {{"role", "user"}, {"content", r.user}}})},
          {"temperature", r.temperature}};
}

/// Blocks callers beyond `limit` concurrent holders.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit = 4) : limit_(limit < 1 ? 1 : limit) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }
  int limit() const { return limit_; }

 private:
  int limit_;
  int active_{0};
  std::mutex mutex_;
  std::condition_variable cv_;
};

class Backend {
 public:
  explicit Backend(int max_concurrency = 4) : limiter_(max_concurrency) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  /// One attempt. Throws Error{Timeout, TransportFailure, BackendRefusal, ...}.
  virtual std::string send(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;

  ConcurrencyLimiter& limiter() { return limiter_; }
  std::size_t attempts() const { return attempts_.load(); }
  void count_attempt() { attempts_.fetch_add(1); }

 private:
  ConcurrencyLimiter limiter_;
  std::atomic<std::size_t> attempts_{0};
};

struct CompleteOptions {
  std::string model;
  double timeout_s{60.0};
  int retries{2};
};

/// Sends `bundle`, retrying transport failures and timeouts up to
/// `opts.retries` extra times. Refusals and script errors are not retried.
inline std::string complete(const PromptBundle& bundle, Backend& backend, const CompleteOptions& opts = {}) {
  ChatRequest req{opts.model, bundle.system_text, bundle.user_text, bundle.kind, 0.0, opts.timeout_s};
  const int attempts = 1 + (opts.retries > 0 ? opts.retries : 0);
  for (int i = 0;; ++i) {
    backend.limiter().acquire();
    try {
      backend.count_attempt();
      std::string out = backend.send(req);
      backend.limiter().release();
      return out;
    } catch (const Error& e) {
      backend.limiter().release();
      const bool retryable = e.code() == ErrorCode::TransportFailure || e.code() == ErrorCode::Timeout;
      if (!retryable || i + 1 >= attempts) throw;
    } catch (...) {
      backend.limiter().release();
      throw;
    }
  }
}

// ---------------------------------------------------------------------------
// Scripted mock

struct MockRule {
  std::optional<PromptKind> kind;  // nullopt matches any kind
  std::string contains;            // empty matches any prompt
  std::string response;
  int uses{0};                     // 0 = unlimited
};

/// Answers from an ordered rule table; the first rule whose kind and
/// substring match (and that still has uses left) wins.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<MockRule> rules = {}) : rules_(std::move(rules)), used_(rules_.size(), 0) {}

  void add(MockRule rule) {
    std::lock_guard lock(mutex_);
    rules_.push_back(std::move(rule));
    used_.push_back(0);
  }

  std::string send(const ChatRequest& req) override {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const auto& r = rules_[i];
      if (r.kind && *r.kind != req.kind) continue;
      if (r.uses > 0 && used_[i] >= r.uses) continue;
      if (!r.contains.empty() && req.system.find(r.contains) == std::string::npos &&
          req.user.find(r.contains) == std::string::npos)
        continue;
      ++used_[i];
      last_ = req;
      return r.response;
    }
    throw Error(ErrorCode::ScriptExhausted, std::string("mock script has no answer for a ") + to_string(req.kind) +
                                                " prompt");
  }

  std::string name() const override { return "mock"; }

  std::optional<ChatRequest> last_request() const {
    std::lock_guard lock(mutex_);
    return last_;
  }

 private:
  std::vector<MockRule> rules_;
  std::vector<int> used_;
  std::optional<ChatRequest> last_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Local process runner: the request JSON goes to the command's stdin and
// its stdout is the reply text.

class StdioBackend : public Backend {
 public:
  explicit StdioBackend(std::string command, int max_concurrency = 1)
      : Backend(max_concurrency), command_(std::move(command)) {}

  std::string send(const ChatRequest& req) override {
    namespace fs = std::filesystem;
    static std::atomic<unsigned> counter{0};
    const fs::path tmp = fs::temp_directory_path() /
                         ("letspi_req_" + std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1)));
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorCode::TransportFailure, "cannot write request file " + tmp.string());
      out << chat_body(req).dump();
    }
    const long secs = std::max(1L, static_cast<long>(std::ceil(req.timeout_s)));
    const std::string cmd = "timeout " + std::to_string(secs) + " " + command_ + " < '" + tmp.string() + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
      fs::remove(tmp);
      throw Error(ErrorCode::TransportFailure, "cannot start '" + command_ + "'");
    }
    std::string reply;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) reply.append(buf, n);
    const int status = ::pclose(pipe);
    std::error_code ec;
    fs::remove(tmp, ec);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code == 124) throw Error(ErrorCode::Timeout, "'" + command_ + "' timed out");
    if (code != 0) throw Error(ErrorCode::TransportFailure, "'" + command_ + "' exited with " + std::to_string(code));
    if (reply.empty()) throw Error(ErrorCode::BackendRefusal, "'" + command_ + "' returned nothing");
    return reply;
  }

  std::string name() const override { return "stdio"; }

 private:
  std::string command_;
};

// ---------------------------------------------------------------------------
// Configuration

struct BackendConfig {
  std::string kind{"scripted"};  // scripted | mock | http | stdio
  std::string url;
  std::string model;
  std::string command;
  std::string script;  // mock backend: JSON rule table
  std::string response_path{"choices/0/message/content"};
  double timeout_s{60.0};
  int retries{2};
  int max_concurrency{4};
};

/// Overrides from LETSPI_LLM_URL, LETSPI_LLM_TIMEOUT_S and the phase's model
/// variable (LETSPI_LLM_MODEL_MEMORY or LETSPI_LLM_MODEL_FAST).
inline BackendConfig apply_env(BackendConfig cfg, bool fast_phase) {
  if (const char* url = std::getenv("LETSPI_LLM_URL"); url && *url) {
    cfg.url = url;
    if (cfg.kind != "stdio") cfg.kind = "http";
  }
  if (const char* m = std::getenv(fast_phase ? "LETSPI_LLM_MODEL_FAST" : "LETSPI_LLM_MODEL_MEMORY"); m && *m)
    cfg.model = m;
  if (const char* t = std::getenv("LETSPI_LLM_TIMEOUT_S"); t && *t) {
    char* end = nullptr;
    const double v = std::strtod(t, &end);
    if (end == t || !(v > 0.0)) throw Error(ErrorCode::ConfigError, "LETSPI_LLM_TIMEOUT_S must be a positive number");
    cfg.timeout_s = v;
  }
  return cfg;
}

}  // namespace letspi::llm

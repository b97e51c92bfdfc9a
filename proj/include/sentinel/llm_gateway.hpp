#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sentinel/error.hpp"
#include "sentinel/prompt.hpp"

namespace sentinel {

/// Any failure to obtain an insight from the provider.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// 401/403: the credentials are wrong; retrying cannot help.
class AuthError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Connection failure or timeout.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Replay store has no response for the request.
class ReplayMissError : public ProviderError {
 public:
  explicit ReplayMissError(std::string key)
      : ProviderError("replay miss: no recorded response for request " + key),
        key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

using Header = std::pair<std::string, std::string>;

struct HttpRequest {
  std::string url;
  std::vector<Header> headers;
  std::string body;
  std::chrono::milliseconds timeout{60000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError when no HTTP response was obtained.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Real HTTPS client.
class HttplibTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

/// Scripted responses for tests. Once the script runs out the last entry
/// repeats. Requests are kept for inspection.
class MockTransport final : public Transport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;

  MockTransport() = default;
  explicit MockTransport(Handler handler) : handler_(std::move(handler)) {}

  void push(int status, std::string body);
  /// A chat-completion body whose first choice carries `text`.
  void push_text(const std::string& text);
  void push_transport_failure();

  HttpResponse post(const HttpRequest& request) override;

  [[nodiscard]] std::vector<HttpRequest> requests() const;
  [[nodiscard]] std::size_t calls() const;

 private:
  struct Step {
    bool fail = false;
    HttpResponse response;
  };
  mutable std::mutex mutex_;
  Handler handler_;
  std::deque<Step> script_;
  std::optional<Step> last_;
  std::vector<HttpRequest> requests_;
};

/// Request/response pairs keyed by SHA-256 of the request body.
class SessionStore {
 public:
  struct Entry {
    std::string request;
    HttpResponse response;
  };

  SessionStore() = default;
  static SessionStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  [[nodiscard]] std::optional<Entry> find(const std::string& key) const;
  void put(const std::string& key, Entry entry);
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  nlohmann::json to_json() const;
  static SessionStore from_json(const nlohmann::json& j);

 private:
  std::map<std::string, Entry> entries_;
};

std::string request_key(const HttpRequest& request);

/// Forwards to `inner` and persists every successful (2xx) exchange.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(Transport& inner, std::filesystem::path path);
  HttpResponse post(const HttpRequest& request) override;

 private:
  Transport& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
  SessionStore store_;
};

/// Answers only from a recorded session; never touches the network.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& path);
  explicit ReplayTransport(SessionStore store) : store_(std::move(store)) {}
  HttpResponse post(const HttpRequest& request) override;

 private:
  SessionStore store_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual double now_ms() = 0;
  virtual void sleep_for(std::chrono::milliseconds duration) = 0;
};

class SystemClock final : public Clock {
 public:
  double now_ms() override;
  void sleep_for(std::chrono::milliseconds duration) override;
};

/// Time moves only when someone sleeps; every sleep is recorded.
class FakeClock final : public Clock {
 public:
  double now_ms() override;
  void sleep_for(std::chrono::milliseconds duration) override;
  void advance(std::chrono::milliseconds duration);
  [[nodiscard]] std::vector<std::chrono::milliseconds> sleeps() const;

 private:
  mutable std::mutex mutex_;
  double now_ = 0.0;
  std::vector<std::chrono::milliseconds> sleeps_;
};

struct ProviderConfig {
  std::string name = "generic";  // openai | deepseek | mistral | gemini | generic
  std::string base_url;          // empty: KPM_LLM_BASE_URL
  std::string model;
  std::string api_key_env = "KPM_LLM_API_KEY";
  bool reasoning_enabled = false;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.2;
  int max_tokens = 1024;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  double jitter = 0.1;  // each delay is stretched by U(0, jitter) of itself

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Endpoint and default model of a known provider; "mock" targets a dummy
/// local URL that only mock or replay transports will ever see.
ProviderConfig provider_preset(const std::string& name);

/// Chat-completion request body for the provider, plus adapter warnings.
struct ChatRequest {
  nlohmann::json body;
  std::vector<std::string> warnings;
};
ChatRequest build_chat_request(const PromptBundle& bundle, const ProviderConfig& config);

struct InsightText {
  std::string text;
  std::string provider;
  std::string model;
  double latency_ms = 0.0;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
  std::optional<std::int64_t> total_tokens;
  int retries = 0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const InsightText& insight);

/// First choice's message content. Throws ParseError with a body excerpt.
InsightText parse_chat_response(const std::string& body);

class LlmClient {
 public:
  explicit LlmClient(Transport& transport, Clock& clock, std::ptrdiff_t max_in_flight = 4,
                     std::uint64_t jitter_seed = 0);

  /// POST the bundle; retries 429, 5xx and transport failures with
  /// exponential backoff. Safe to call from several threads.
  InsightText complete(const PromptBundle& bundle, const ProviderConfig& config);

 private:
  std::chrono::milliseconds backoff(const ProviderConfig& config, int attempt);

  Transport& transport_;
  Clock& clock_;
  std::counting_semaphore<64> in_flight_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

}  // namespace sentinel

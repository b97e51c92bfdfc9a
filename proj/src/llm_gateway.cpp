#include "sentinel/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "sentinel/config.hpp"

namespace sentinel {

namespace {

constexpr std::size_t kExcerptBytes = 200;

std::string excerpt(const std::string& body) {
  if (body.size() <= kExcerptBytes) return body;
  std::size_t cut = kExcerptBytes;
  // Do not split a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(body[cut]) & 0xC0) == 0x80) --cut;
  return body.substr(0, cut) + "...";
}

std::string chat_body(const std::string& text) {
  return nlohmann::json{{"choices", {{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", text}}},
                                      {"finish_reason", "stop"}}}}}
      .dump();
}

bool retryable(int status) { return status == 429 || (status >= 500 && status <= 599); }

}  // namespace

void MockTransport::push(int status, std::string body) {
  std::lock_guard lock(mutex_);
  script_.push_back({false, {status, std::move(body)}});
}

void MockTransport::push_text(const std::string& text) { push(200, chat_body(text)); }

void MockTransport::push_transport_failure() {
  std::lock_guard lock(mutex_);
  script_.push_back({true, {}});
}

HttpResponse MockTransport::post(const HttpRequest& request) {
  Step step;
  Handler handler;
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    handler = handler_;
    if (!handler) {
      if (!script_.empty()) {
        last_ = script_.front();
        script_.pop_front();
      }
      if (!last_) throw TransportError("mock transport has no scripted response");
      step = *last_;
    }
  }
  if (handler) return handler(request);
  if (step.fail) throw TransportError("mock transport failure");
  return step.response;
}

std::vector<HttpRequest> MockTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t MockTransport::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::string request_key(const HttpRequest& request) { return sha256_hex(request.body); }

nlohmann::json SessionStore::to_json() const {
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [key, e] : entries_) {
    entries[key] = {{"request", e.request},
                    {"status", e.response.status},
                    {"response", e.response.body}};
  }
  return {{"version", 1}, {"entries", entries}};
}

SessionStore SessionStore::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("session store: unsupported version");
    SessionStore store;
    for (const auto& [key, e] : j.at("entries").items()) {
      store.entries_[key] = {e.at("request").get<std::string>(),
                             {e.at("status").get<int>(), e.at("response").get<std::string>()}};
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("session store: {}", e.what()));
  }
}

SessionStore SessionStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open session store {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("session store {}: {}", path.string(), e.what()));
  }
}

void SessionStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument(fmt::format("cannot write session store {}", path.string()));
    out << to_json().dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

std::optional<SessionStore::Entry> SessionStore::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void SessionStore::put(const std::string& key, Entry entry) { entries_[key] = std::move(entry); }

RecordingTransport::RecordingTransport(Transport& inner, std::filesystem::path path)
    : inner_(inner), path_(std::move(path)) {
  if (std::filesystem::exists(path_)) store_ = SessionStore::load(path_);
}

HttpResponse RecordingTransport::post(const HttpRequest& request) {
  HttpResponse response = inner_.post(request);
  if (response.status >= 200 && response.status < 300) {
    std::lock_guard lock(mutex_);
    store_.put(request_key(request), {request.body, response});
    store_.save(path_);
  }
  return response;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& path)
    : store_(SessionStore::load(path)) {}

HttpResponse ReplayTransport::post(const HttpRequest& request) {
  const auto key = request_key(request);
  auto entry = store_.find(key);
  if (!entry) throw ReplayMissError(key);
  return entry->response;
}

double SystemClock::now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_for(std::chrono::milliseconds duration) {
  std::this_thread::sleep_for(duration);
}

double FakeClock::now_ms() {
  std::lock_guard lock(mutex_);
  return now_;
}

void FakeClock::sleep_for(std::chrono::milliseconds duration) {
  std::lock_guard lock(mutex_);
  sleeps_.push_back(duration);
  now_ += double(duration.count());
}

void FakeClock::advance(std::chrono::milliseconds duration) {
  std::lock_guard lock(mutex_);
  now_ += double(duration.count());
}

std::vector<std::chrono::milliseconds> FakeClock::sleeps() const {
  std::lock_guard lock(mutex_);
  return sleeps_;
}

void ProviderConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout_seconds", "must be positive");
  if (max_retries < 0) throw ConfigError("max_retries", "must be non-negative");
  if (!(backoff_base_seconds >= 0.0)) throw ConfigError("backoff_base_seconds", "must be >= 0");
  if (!(backoff_factor >= 1.0)) throw ConfigError("backoff_factor", "must be >= 1");
  if (!(jitter >= 0.0)) throw ConfigError("jitter", "must be >= 0");
  if (max_tokens <= 0) throw ConfigError("max_tokens", "must be positive");
  if (model.empty()) throw ConfigError("model", "must not be empty");
  if (api_key_env.empty()) throw ConfigError("api_key_env", "must name an environment variable");
}

ProviderConfig provider_preset(const std::string& name) {
  ProviderConfig c;
  c.name = name;
  if (name == "openai") {
    c.base_url = "https://api.openai.com/v1";
    c.model = "gpt-4o";
  } else if (name == "deepseek") {
    c.base_url = "https://api.deepseek.com";
    c.model = "deepseek-chat";
  } else if (name == "mistral") {
    c.base_url = "https://api.mistral.ai/v1";
    c.model = "mistral-large-latest";
  } else if (name == "gemini") {
    c.base_url = "https://generativelanguage.googleapis.com/v1beta/openai";
    c.model = "gemini-2.0-flash";
  } else if (name == "mock") {
    c.base_url = "http://mock.invalid/v1";
    c.model = "mock-model";
  } else if (name == "generic") {
    c.model = "default";
  } else {
    throw ConfigError("provider", fmt::format("unknown provider '{}'", name));
  }
  return c;
}

ChatRequest build_chat_request(const PromptBundle& bundle, const ProviderConfig& config) {
  ChatRequest req;
  auto messages = nlohmann::json::array();
  for (const auto& m : bundle.messages()) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  req.body = {{"model", config.model},
              {"messages", messages},
              {"temperature", config.temperature},
              {"max_tokens", config.max_tokens}};
  if (!config.reasoning_enabled) return req;
  if (config.name == "openai" || config.name == "gemini") {
    req.body["reasoning_effort"] = "medium";
    if (config.name == "openai") {
      // Reasoning models reject sampling temperature and take a completion budget instead.
      req.body.erase("temperature");
      req.body.erase("max_tokens");
      req.body["max_completion_tokens"] = config.max_tokens;
    }
  } else if (config.name == "deepseek") {
    req.body["model"] = "deepseek-reasoner";
  } else {
    req.warnings.push_back(
        fmt::format("provider '{}' has no reasoning switch; reasoning_enabled ignored",
                    config.name));
  }
  return req;
}

nlohmann::json to_json(const InsightText& in) {
  auto opt = [](const std::optional<std::int64_t>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"text", in.text},
          {"provider", in.provider},
          {"model", in.model},
          {"latency_ms", in.latency_ms},
          {"prompt_tokens", opt(in.prompt_tokens)},
          {"completion_tokens", opt(in.completion_tokens)},
          {"total_tokens", opt(in.total_tokens)},
          {"retries", in.retries},
          {"warnings", in.warnings}};
}

InsightText parse_chat_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw ParseError(fmt::format("malformed provider response: {}", excerpt(body)));
  }
  const nlohmann::json* content = nullptr;
  if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& first = j["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content")) {
      content = &first["message"]["content"];
    }
  }
  if (content == nullptr || !content->is_string() || content->get<std::string>().empty()) {
    throw ParseError(
        fmt::format("malformed provider response (no choices[0].message.content): {}",
                    excerpt(body)));
  }
  InsightText out;
  out.text = content->get<std::string>();
  if (j.contains("model") && j["model"].is_string()) out.model = j["model"].get<std::string>();
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    auto field = [&](const char* key) -> std::optional<std::int64_t> {
      if (u.contains(key) && u[key].is_number_integer()) return u[key].get<std::int64_t>();
      return std::nullopt;
    };
    out.prompt_tokens = field("prompt_tokens");
    out.completion_tokens = field("completion_tokens");
    out.total_tokens = field("total_tokens");
  }
  return out;
}

LlmClient::LlmClient(Transport& transport, Clock& clock, std::ptrdiff_t max_in_flight,
                     std::uint64_t jitter_seed)
    : transport_(transport), clock_(clock), in_flight_(max_in_flight), rng_(jitter_seed) {
  if (max_in_flight < 1 || max_in_flight > 64) {
    throw InvalidArgument("max_in_flight must be in [1, 64]");
  }
}

std::chrono::milliseconds LlmClient::backoff(const ProviderConfig& config, int attempt) {
  double seconds = config.backoff_base_seconds * std::pow(config.backoff_factor, attempt);
  if (config.jitter > 0.0) {
    std::lock_guard lock(rng_mutex_);
    seconds *= 1.0 + std::uniform_real_distribution<double>(0.0, config.jitter)(rng_);
  }
  return std::chrono::milliseconds(std::llround(seconds * 1000.0));
}

InsightText LlmClient::complete(const PromptBundle& bundle, const ProviderConfig& config) {
  config.validate();
  std::string base_url = config.base_url;
  if (base_url.empty()) {
    if (const char* env = std::getenv("KPM_LLM_BASE_URL")) base_url = env;
  }
  if (base_url.empty()) {
    throw ConfigError("base_url", "not configured and KPM_LLM_BASE_URL is unset");
  }
  while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();

  auto chat = build_chat_request(bundle, config);
  HttpRequest request;
  request.url = base_url + "/chat/completions";
  request.body = chat.body.dump();
  request.timeout = std::chrono::milliseconds(std::llround(config.timeout_seconds * 1000.0));
  request.headers.emplace_back("Content-Type", "application/json");
  if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr && *key != '\0') {
    request.headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  const double start = clock_.now_ms();
  std::string last_failure;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0) clock_.sleep_for(backoff(config, attempt - 1));
    HttpResponse response;
    try {
      response = transport_.post(request);
    } catch (const ReplayMissError&) {
      throw;
    } catch (const TransportError& e) {
      last_failure = e.what();
      if (attempt < config.max_retries) continue;
      throw TransportError(
          fmt::format("{} (gave up after {} retries)", last_failure, config.max_retries));
    }
    if (response.status == 401 || response.status == 403) {
      throw AuthError(fmt::format("authentication failed (HTTP {}): {}", response.status,
                                  excerpt(response.body)));
    }
    if (retryable(response.status)) {
      last_failure = fmt::format("HTTP {}: {}", response.status, excerpt(response.body));
      if (attempt < config.max_retries) continue;
      throw ProviderError(
          fmt::format("{} (gave up after {} retries)", last_failure, config.max_retries));
    }
    if (response.status < 200 || response.status >= 300) {
      throw ProviderError(
          fmt::format("request rejected (HTTP {}): {}", response.status, excerpt(response.body)));
    }
    InsightText out = parse_chat_response(response.body);
    out.provider = config.name;
    if (out.model.empty()) out.model = chat.body["model"].get<std::string>();
    out.latency_ms = clock_.now_ms() - start;
    out.retries = attempt;
    out.warnings = std::move(chat.warnings);
    return out;
  }
}

}  // namespace sentinel

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "helpers.hpp"
#include "sentinel/config.hpp"
#include "sentinel/llm_gateway.hpp"

using namespace sentinel;
using namespace std::chrono_literals;

namespace {

PromptBundle sample_bundle(const std::string& user = "How anomalous is this window?") {
  PromptBundle b;
  b.system_text = system_text(PromptMode::ZeroShot);
  b.user_text = user;
  return b;
}

ProviderConfig mock_config() {
  auto c = provider_preset("mock");
  c.jitter = 0.0;
  c.api_key_env = "SENTINEL_TEST_UNSET_KEY";
  return c;
}

}  // namespace

TEST_SUITE("llm-gateway") {
  TEST_CASE("mock text comes back with latency") {
    FakeClock clock;
    MockTransport transport([&](const HttpRequest&) {
      clock.advance(250ms);
      return HttpResponse{200, R"({"model":"m1","choices":[{"message":{"role":"assistant","content":"All clear."}}],
                                  "usage":{"prompt_tokens":12,"completion_tokens":3,"total_tokens":15}})"};
    });
    LlmClient client(transport, clock);
    const auto out = client.complete(sample_bundle(), mock_config());
    CHECK(out.text == "All clear.");
    CHECK(out.model == "m1");
    CHECK(out.provider == "mock");
    CHECK(out.latency_ms == 250.0);
    CHECK(out.prompt_tokens == 12);
    CHECK(out.total_tokens == 15);
    CHECK(out.retries == 0);
    const auto req = transport.requests().at(0);
    CHECK(req.url == "http://mock.invalid/v1/chat/completions");
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "mock-model");
    CHECK(body["messages"].size() == 2);
    CHECK(body["temperature"] == 0.2);
    CHECK(body["max_tokens"] == 1024);
  }

  TEST_CASE("429 twice then success follows the backoff schedule") {
    FakeClock clock;
    MockTransport transport;
    transport.push(429, "slow down");
    transport.push(429, "slow down");
    transport.push_text("ok");
    LlmClient client(transport, clock);
    const auto out = client.complete(sample_bundle(), mock_config());
    CHECK(out.text == "ok");
    CHECK(out.retries == 2);
    CHECK(transport.calls() == 3);
    CHECK(clock.sleeps() == std::vector<std::chrono::milliseconds>{1000ms, 2000ms});
  }

  TEST_CASE("jitter stretches each delay by at most the configured fraction") {
    FakeClock clock;
    MockTransport transport;
    transport.push(503, "");
    transport.push(503, "");
    transport.push_text("ok");
    LlmClient client(transport, clock, 4, 17);
    auto cfg = mock_config();
    cfg.jitter = 0.1;
    client.complete(sample_bundle(), cfg);
    const auto s = clock.sleeps();
    REQUIRE(s.size() == 2);
    CHECK(s[0] >= 1000ms);
    CHECK(s[0] <= 1100ms);
    CHECK(s[1] >= 2000ms);
    CHECK(s[1] <= 2200ms);
  }

  TEST_CASE("401 is terminal") {
    FakeClock clock;
    MockTransport transport;
    transport.push(401, R"({"error":"bad key"})");
    LlmClient client(transport, clock);
    CHECK_THROWS_AS(client.complete(sample_bundle(), mock_config()), AuthError);
    CHECK(transport.calls() == 1);
    CHECK(clock.sleeps().empty());
  }

  TEST_CASE("other 4xx is terminal, exhausted retries give up") {
    FakeClock clock;
    MockTransport bad_request;
    bad_request.push(400, "nope");
    LlmClient a(bad_request, clock);
    CHECK_THROWS_AS(a.complete(sample_bundle(), mock_config()), ProviderError);
    CHECK(bad_request.calls() == 1);

    MockTransport busy;
    busy.push(500, "down");
    LlmClient b(busy, clock);
    CHECK_THROWS_AS(b.complete(sample_bundle(), mock_config()), ProviderError);
    CHECK(busy.calls() == 4);

    MockTransport offline;
    offline.push_transport_failure();
    LlmClient c(offline, clock);
    auto cfg = mock_config();
    cfg.max_retries = 1;
    CHECK_THROWS_AS(c.complete(sample_bundle(), cfg), TransportError);
    CHECK(offline.calls() == 2);
  }

  TEST_CASE("malformed responses raise a parse error with an excerpt") {
    FakeClock clock;
    MockTransport transport;
    transport.push(200, "<html>gateway</html>");
    LlmClient client(transport, clock);
    try {
      client.complete(sample_bundle(), mock_config());
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("<html>gateway</html>") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_chat_response(R"({"choices":[]})"), ParseError);
    CHECK_THROWS_AS(parse_chat_response(R"({"choices":[{"message":{"content":""}}]})"), ParseError);
  }

  TEST_CASE("api key travels only in the authorization header") {
    ::setenv("SENTINEL_TEST_KEY", "sk-test-very-secret", 1);
    FakeClock clock;
    MockTransport transport;
    transport.push_text("ok");
    LlmClient client(transport, clock);
    auto cfg = mock_config();
    cfg.api_key_env = "SENTINEL_TEST_KEY";
    const auto out = client.complete(sample_bundle(), cfg);
    const auto req = transport.requests().at(0);
    CHECK(req.body.find("sk-test-very-secret") == std::string::npos);
    bool found = false;
    for (const auto& [k, v] : req.headers) found = found || (k == "Authorization" && v == "Bearer sk-test-very-secret");
    CHECK(found);
    CHECK(to_json(out).dump().find("sk-test") == std::string::npos);
    ::unsetenv("SENTINEL_TEST_KEY");

    MockTransport anon;
    anon.push_text("ok");
    LlmClient c2(anon, clock);
    c2.complete(sample_bundle(), mock_config());
    const auto anon_req = anon.requests().at(0);
    for (const auto& [k, v] : anon_req.headers) CHECK(k != "Authorization");
  }

  TEST_CASE("record then replay gives the same insight; a changed bundle misses") {
    const auto dir = testing::scratch_dir("gateway-replay");
    const auto store = dir / "session.json";
    FakeClock clock;
    MockTransport live;
    live.push_text("Uplink flood suspected: ställ in hastighetsgräns ≤ 0.22 ✓ 検知");
    RecordingTransport recorder(live, store);
    LlmClient rec_client(recorder, clock);
    const auto recorded = rec_client.complete(sample_bundle(), mock_config());

    ReplayTransport replay(store);
    LlmClient replay_client(replay, clock);
    const auto replayed = replay_client.complete(sample_bundle(), mock_config());
    CHECK(replayed.text == recorded.text);
    CHECK(to_json(replayed) == to_json(recorded));
    CHECK(live.calls() == 1);

    CHECK_THROWS_AS(replay_client.complete(sample_bundle("a different question"), mock_config()),
                    ReplayMissError);

    const auto loaded = SessionStore::load(store);
    CHECK(loaded.size() == 1);
    const auto round = SessionStore::from_json(nlohmann::json::parse(loaded.to_json().dump()));
    const auto key = request_key(live.requests().at(0));
    CHECK(round.find(key)->request == loaded.find(key)->request);
    CHECK(round.find(key)->response.body == loaded.find(key)->response.body);
  }

  TEST_CASE("failed exchanges are not recorded") {
    const auto dir = testing::scratch_dir("gateway-record-fail");
    FakeClock clock;
    MockTransport live;
    live.push(500, "boom");
    live.push_text("fine");
    RecordingTransport recorder(live, dir / "s.json");
    LlmClient client(recorder, clock);
    client.complete(sample_bundle(), mock_config());
    CHECK(SessionStore::load(dir / "s.json").size() == 1);
  }

  TEST_CASE("in-flight requests are bounded") {
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    MockTransport transport([&](const HttpRequest&) {
      const int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(20ms);
      --active;
      return HttpResponse{200, R"({"choices":[{"message":{"content":"ok"}}]})"};
    });
    SystemClock clock;
    LlmClient client(transport, clock, 2);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i) {
      threads.emplace_back([&] { client.complete(sample_bundle(), mock_config()); });
    }
    for (auto& t : threads) t.join();
    CHECK(transport.calls() == 6);
    CHECK(peak.load() <= 2);
  }

  TEST_CASE("provider presets and reasoning adapters") {
    CHECK_THROWS_AS(provider_preset("unknown"), ConfigError);
    auto openai = provider_preset("openai");
    openai.reasoning_enabled = true;
    const auto a = build_chat_request(sample_bundle(), openai);
    CHECK(a.body["reasoning_effort"] == "medium");
    CHECK_FALSE(a.body.contains("temperature"));
    CHECK(a.body["max_completion_tokens"] == 1024);
    auto deepseek = provider_preset("deepseek");
    deepseek.reasoning_enabled = true;
    CHECK(build_chat_request(sample_bundle(), deepseek).body["model"] == "deepseek-reasoner");
    auto mistral = provider_preset("mistral");
    mistral.reasoning_enabled = true;
    const auto m = build_chat_request(sample_bundle(), mistral);
    CHECK(m.warnings.size() == 1);
    CHECK_FALSE(m.body.contains("reasoning_effort"));

    auto bad = mock_config();
    bad.max_retries = -1;
    try {
      bad.validate();
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.key() == "max_retries");
    }
  }

  TEST_CASE("base url falls back to the environment") {
    FakeClock clock;
    MockTransport transport;
    transport.push_text("ok");
    LlmClient client(transport, clock);
    auto cfg = mock_config();
    cfg.base_url.clear();
    ::unsetenv("KPM_LLM_BASE_URL");
    CHECK_THROWS_AS(client.complete(sample_bundle(), cfg), ConfigError);
    ::setenv("KPM_LLM_BASE_URL", "http://env.invalid/v1/", 1);
    client.complete(sample_bundle(), cfg);
    CHECK(transport.requests().back().url == "http://env.invalid/v1/chat/completions");
    ::unsetenv("KPM_LLM_BASE_URL");
  }
}

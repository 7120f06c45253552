#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <thread>

#include "mindgym/gateway.hpp"
#include "mindgym/mock_backend.hpp"

using namespace mindgym;
using nlohmann::json;

namespace {

// Scripted fake server: plays back a fixed sequence of responses and records
// each request's body and arrival time.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}

    HttpResponse post(const std::string& path, const std::string& body,
                      const std::string& api_key) override {
        std::lock_guard lock(mu_);
        paths.push_back(path);
        bodies.push_back(body);
        keys.push_back(api_key);
        times.push_back(std::chrono::steady_clock::now());
        std::size_t idx = std::min(calls++, script_.size() - 1);
        return script_[idx];
    }

    std::vector<std::string> paths, bodies, keys;
    std::vector<std::chrono::steady_clock::time_point> times;
    std::size_t calls = 0;

private:
    std::mutex mu_;
    std::vector<HttpResponse> script_;
};

HttpResponse ok_chat(const std::string& content) {
    json body{{"choices", json::array({{{"message", {{"content", content}}}}})}};
    return {200, body.dump()};
}

GatewayConfig fast_config() {
    GatewayConfig c;
    c.api_key = "test-key";
    c.backoff_base = std::chrono::milliseconds(10);
    return c;
}

ChatRequest simple_request() {
    ChatRequest req;
    req.messages.push_back({Role::User, "hello", {}});
    return req;
}

}  // namespace

TEST_CASE("chat request body matches the recorded wire fixture") {
    ChatRequest req;
    req.model = "m1";
    req.temperature = 0.5;
    req.max_tokens = 128;
    req.messages.push_back({Role::System, "sys", {}});
    req.messages.push_back({Role::User, "usr", {}});
    REQUIRE(chat_request_body(req).dump() ==
            R"({"max_tokens":128,"messages":[{"content":"sys","role":"system"},{"content":"usr","role":"user"}],"model":"m1","temperature":0.5})");

    SECTION("image parts render as content-part arrays") {
        req.messages[1].images.push_back({"https://example.test/p.png"});
        REQUIRE(chat_request_body(req).dump() ==
                R"({"max_tokens":128,"messages":[{"content":"sys","role":"system"},{"content":[{"text":"usr","type":"text"},{"image_url":{"url":"https://example.test/p.png"},"type":"image_url"}],"role":"user"}],"model":"m1","temperature":0.5})");
    }
    SECTION("sampling seed is forwarded when set") {
        req.seed = 7;
        REQUIRE(chat_request_body(req)["seed"] == 7);
    }
}

TEST_CASE("embeddings request body matches the recorded wire fixture") {
    REQUIRE(embed_request_body("e1", {"a", "b"}).dump() ==
            R"({"input":["a","b"],"model":"e1"})");
}

TEST_CASE("transient failures retry with non-decreasing gaps") {
    ScriptedTransport* t;
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpResponse>{{429, "busy"}, {429, "busy"}, ok_chat("fine")});
    t = transport.get();
    Gateway gw(fast_config(), transport);
    REQUIRE(gw.chat(simple_request()) == "fine");
    REQUIRE(t->calls == 3);
    REQUIRE(t->paths[0] == "/v1/chat/completions");
    auto gap1 = t->times[1] - t->times[0];
    auto gap2 = t->times[2] - t->times[1];
    REQUIRE(gap2 >= gap1);  // exponential backoff never shrinks the delay
}

TEST_CASE("retry budget exhaustion raises TransportError") {
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{503, "down"}});
    GatewayConfig cfg = fast_config();
    cfg.max_retries = 2;
    Gateway gw(cfg, transport);
    REQUIRE_THROWS_AS(gw.chat(simple_request()), TransportError);
    REQUIRE(transport->calls == 3);  // initial try + 2 retries
}

TEST_CASE("auth failures never retry") {
    for (int status : {401, 403}) {
        auto transport =
            std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{status, "no"}});
        Gateway gw(fast_config(), transport);
        REQUIRE_THROWS_AS(gw.chat(simple_request()), AuthError);
        REQUIRE(transport->calls == 1);
    }
}

TEST_CASE("other 4xx statuses fail immediately without retry") {
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{400, "bad"}});
    Gateway gw(fast_config(), transport);
    REQUIRE_THROWS_AS(gw.chat(simple_request()), TransportError);
    REQUIRE(transport->calls == 1);
}

TEST_CASE("transport-level failures (status 0) are retried") {
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpResponse>{{0, ""}, ok_chat("recovered")});
    Gateway gw(fast_config(), transport);
    REQUIRE(gw.chat(simple_request()) == "recovered");
    REQUIRE(transport->calls == 2);
}

TEST_CASE("malformed 200 bodies raise ProtocolError") {
    auto transport =
        std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{200, "not json"}});
    Gateway gw(fast_config(), transport);
    REQUIRE_THROWS_AS(gw.chat(simple_request()), ProtocolError);

    auto transport2 = std::make_shared<ScriptedTransport>(
        std::vector<HttpResponse>{{200, R"({"unexpected":true})"}});
    Gateway gw2(fast_config(), transport2);
    REQUIRE_THROWS_AS(gw2.chat(simple_request()), ProtocolError);
}

TEST_CASE("embeddings map responses by index and enforce equal dimensions") {
    json body{{"data", json::array({{{"index", 1}, {"embedding", {3.0, 4.0}}},
                                    {{"index", 0}, {"embedding", {1.0, 2.0}}}})}};
    auto transport =
        std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{200, body.dump()}});
    Gateway gw(fast_config(), transport);
    auto vecs = gw.embed({"a", "b"});
    REQUIRE(vecs[0] == std::vector<double>{1.0, 2.0});
    REQUIRE(vecs[1] == std::vector<double>{3.0, 4.0});
    REQUIRE(transport->paths[0] == "/v1/embeddings");

    SECTION("unequal dimensions raise DimensionMismatch") {
        json bad{{"data", json::array({{{"index", 0}, {"embedding", {1.0}}},
                                       {{"index", 1}, {"embedding", {1.0, 2.0}}}})}};
        auto t2 = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{{200, bad.dump()}});
        Gateway g2(fast_config(), t2);
        REQUIRE_THROWS_AS(g2.embed({"a", "b"}), DimensionMismatch);
    }
}

TEST_CASE("empty inputs are rejected before any network call") {
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{ok_chat("x")});
    Gateway gw(fast_config(), transport);
    REQUIRE_THROWS_AS(gw.embed({}), ConfigError);
    REQUIRE_THROWS_AS(gw.embed({"a", ""}), ConfigError);
    REQUIRE_THROWS_AS(gw.chat(ChatRequest{}), ConfigError);
    REQUIRE(transport->calls == 0);
}

TEST_CASE("image parts require a vision-capable endpoint") {
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResponse>{ok_chat("x")});
    Gateway gw(fast_config(), transport);  // vision_capable defaults to false
    ChatRequest req = simple_request();
    req.messages[0].images.push_back({"https://example.test/p.png"});
    REQUIRE_THROWS_AS(gw.chat(req), ConfigError);
    REQUIRE(transport->calls == 0);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
    // Transport that tracks concurrent entries.
    class CountingTransport : public Transport {
    public:
        HttpResponse post(const std::string&, const std::string&, const std::string&) override {
            int now = ++current;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
            --current;
            json body{{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            return {200, body.dump()};
        }
        std::atomic<int> current{0};
        std::atomic<int> peak{0};
    };
    auto transport = std::make_shared<CountingTransport>();
    GatewayConfig cfg = fast_config();
    cfg.max_in_flight = 2;
    Gateway gw(cfg, transport);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] { gw.chat(simple_request()); });
    for (auto& t : threads) t.join();
    REQUIRE(transport->peak.load() <= 2);
}

TEST_CASE("mock backend is deterministic per (seed, request)") {
    MockBackend a(99), b(99), c(100);
    ChatRequest req = simple_request();
    REQUIRE(a.chat(req) == b.chat(req));
    REQUIRE(a.chat(req) != c.chat(req));
    REQUIRE(a.embed({"text"}) == b.embed({"text"}));
    REQUIRE(a.embed({"text"}) != c.embed({"text"}));
    REQUIRE(a.embed({"text"})[0].size() == 64);

    SECTION("fixtures take precedence over pseudo-replies") {
        a.add_fixture("hello", "scripted");
        REQUIRE(a.chat(req) == "scripted");
        a.add_fixture_contains("ell", "by-substring");
        REQUIRE(a.chat(req) == "scripted");  // exact match wins
        ChatRequest other;
        other.messages.push_back({Role::User, "well now", {}});
        REQUIRE(a.chat(other) == "by-substring");
    }
    SECTION("the transcript records every chat call") {
        MockBackend m(1);
        m.chat(req);
        m.chat(req);
        REQUIRE(m.chat_calls() == 2);
        REQUIRE(m.transcript()[0].messages[0].text == "hello");
    }
    SECTION("the sampling seed changes the pseudo-reply") {
        MockBackend m(7);
        ChatRequest r1 = simple_request();
        r1.seed = 1;
        ChatRequest r2 = simple_request();
        r2.seed = 2;
        REQUIRE(m.chat(r1) != m.chat(r2));
    }
}

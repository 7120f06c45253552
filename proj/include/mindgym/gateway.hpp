#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <memory>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mindgym/errors.hpp"
#include "mindgym/rng.hpp"
#include "mindgym/text.hpp"

namespace mindgym {

// ---------------------------------------------------------------------------
// Requests
// ---------------------------------------------------------------------------

enum class Role { System, User, Assistant };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    throw Error("unknown Role");
}

struct ImagePart {
    std::string url;  // remote URL or base64 data URI
};

struct ChatMessage {
    Role role = Role::User;
    std::string text;
    std::vector<ImagePart> images;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 2048;
    // Sampling seed forwarded to the endpoint (and hashed by the mock), so
    // regeneration attempts produce distinct yet reproducible replies.
    std::optional<std::uint64_t> seed;

    bool has_images() const {
        for (const auto& m : messages)
            if (!m.images.empty()) return true;
        return false;
    }
};

// OpenAI-compatible chat-completions request body.
inline nlohmann::json chat_request_body(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) {
        nlohmann::json msg{{"role", to_string(m.role)}};
        if (m.images.empty()) {
            msg["content"] = m.text;
        } else {
            nlohmann::json parts = nlohmann::json::array();
            parts.push_back({{"type", "text"}, {"text", m.text}});
            for (const auto& img : m.images)
                parts.push_back({{"type", "image_url"}, {"image_url", {{"url", img.url}}}});
            msg["content"] = parts;
        }
        messages.push_back(std::move(msg));
    }
    nlohmann::json body{{"model", req.model},
                        {"messages", std::move(messages)},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    return body;
}

inline nlohmann::json embed_request_body(const std::string& model,
                                         const std::vector<std::string>& texts) {
    return nlohmann::json{{"model", model}, {"input", texts}};
}

// Canonical text form of a chat request, used for fixture keys and mock
// hashing.
inline std::string canonical_request(const ChatRequest& req) {
    return chat_request_body(req).dump();
}

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;

    // Returns the assistant message content.
    virtual std::string chat(const ChatRequest& req) = 0;

    // One vector per input text, order preserved, all of equal dimension.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

inline void check_embed_inputs(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ConfigError("embed: texts must be non-empty");
    for (const auto& t : texts)
        if (t.empty()) throw ConfigError("embed: empty text in batch");
}

// ---------------------------------------------------------------------------
// HTTP gateway
// ---------------------------------------------------------------------------

struct GatewayConfig {
    std::string base_url = "http://localhost:8080";
    std::string api_key;  // from environment only, never persisted
    std::string chat_model = "default-chat";
    std::string embed_model = "default-embed";
    bool vision_capable = false;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{100};
    double backoff_multiplier = 2.0;
    int max_in_flight = 4;
    std::chrono::milliseconds timeout{60000};
    double requests_per_second = 0.0;  // 0 disables the token bucket
};

struct HttpResponse {
    int status = 0;  // 0 marks a transport-level failure (timeout, refused)
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::string& api_key) = 0;
};

// Counting semaphore with a runtime bound.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : limit_(limit) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < limit_; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }

    struct Guard {
        InFlightLimiter& l;
        explicit Guard(InFlightLimiter& limiter) : l(limiter) { l.acquire(); }
        ~Guard() { l.release(); }
    };

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
};

// Client-side token bucket on request count.
class TokenBucket {
public:
    explicit TokenBucket(double rate_per_second) : rate_(rate_per_second), tokens_(rate_per_second) {
        last_ = std::chrono::steady_clock::now();
    }

    void take() {
        if (rate_ <= 0.0) return;
        std::unique_lock lock(mu_);
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            tokens_ += rate_ * std::chrono::duration<double>(now - last_).count();
            if (tokens_ > rate_) tokens_ = rate_;
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            lock.unlock();
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            lock.lock();
        }
    }

private:
    std::mutex mu_;
    double rate_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

class Gateway : public Backend {
public:
    Gateway(GatewayConfig config, std::shared_ptr<Transport> transport)
        : config_(std::move(config)),
          transport_(std::move(transport)),
          limiter_(config_.max_in_flight),
          bucket_(config_.requests_per_second) {
        if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
        if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    }

    std::string chat(const ChatRequest& req) override {
        if (req.messages.empty()) throw ConfigError("chat: at least one message required");
        if (req.has_images() && !config_.vision_capable)
            throw ConfigError("chat: image parts require a vision-capable endpoint");
        ChatRequest r = req;
        if (r.model.empty()) r.model = config_.chat_model;
        nlohmann::json body = chat_request_body(r);
        nlohmann::json reply = post_with_retries("/v1/chat/completions", body.dump());
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed chat response: ") + e.what());
        }
    }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        check_embed_inputs(texts);
        nlohmann::json body = embed_request_body(config_.embed_model, texts);
        nlohmann::json reply = post_with_retries("/v1/embeddings", body.dump());
        std::vector<std::vector<double>> out(texts.size());
        try {
            for (const auto& item : reply.at("data")) {
                std::size_t idx = item.at("index").get<std::size_t>();
                if (idx >= out.size()) throw ProtocolError("embedding index out of range");
                out[idx] = item.at("embedding").get<std::vector<double>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed embeddings response: ") + e.what());
        }
        for (const auto& v : out) {
            if (v.empty()) throw ProtocolError("embeddings response missing an input");
            if (v.size() != out.front().size())
                throw DimensionMismatch("vectors of unequal length in one response");
        }
        return out;
    }

    const GatewayConfig& config() const { return config_; }

private:
    nlohmann::json post_with_retries(const std::string& path, const std::string& body) {
        InFlightLimiter::Guard guard(limiter_);
        int attempts = 0;
        for (;;) {
            bucket_.take();
            HttpResponse resp = transport_->post(path, body, config_.api_key);
            ++attempts;
            if (resp.status == 200) {
                try {
                    return nlohmann::json::parse(resp.body);
                } catch (const nlohmann::json::exception& e) {
                    throw ProtocolError(std::string("malformed response body: ") + e.what());
                }
            }
            if (resp.status == 401 || resp.status == 403)
                throw AuthError("authentication failed (HTTP " + std::to_string(resp.status) + ")");
            const bool transient = resp.status == 0 || resp.status == 429 || resp.status >= 500;
            if (!transient)
                throw TransportError("non-retryable HTTP " + std::to_string(resp.status));
            if (attempts > config_.max_retries)
                throw TransportError("retries exhausted after " + std::to_string(attempts) +
                                     " attempts (last HTTP " + std::to_string(resp.status) + ")");
            auto delay = std::chrono::duration_cast<std::chrono::milliseconds>(
                config_.backoff_base *
                std::pow(config_.backoff_multiplier, static_cast<double>(attempts - 1)));
            std::this_thread::sleep_for(delay);
        }
    }

    GatewayConfig config_;
    std::shared_ptr<Transport> transport_;
    InFlightLimiter limiter_;
    TokenBucket bucket_;
};

}  // namespace mindgym

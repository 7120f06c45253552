#pragma once

#include <memory>
#include <string>

#include <httplib.h>

#include "mindgym/gateway.hpp"

namespace mindgym {

// Real HTTP transport over cpp-httplib. Connection errors surface as
// status 0, which the gateway treats as transient.
class HttplibTransport : public Transport {
public:
    HttplibTransport(std::string base_url, std::chrono::milliseconds timeout)
        : base_url_(std::move(base_url)), timeout_(timeout) {}

    HttpResponse post(const std::string& path, const std::string& body,
                      const std::string& api_key) override {
        httplib::Client client(base_url_);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) return {0, {}};
        return {res->status, res->body};
    }

private:
    std::string base_url_;
    std::chrono::milliseconds timeout_;
};

}  // namespace mindgym

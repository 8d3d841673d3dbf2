#include "stepcache/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepcache/errors.hpp"

namespace stepcache {

namespace {

using nlohmann::json;

// Splits "http://host:port[/prefix]" into host, port and path prefix.
void parse_base_url(const std::string& url, std::string& host, int& port, std::string& prefix) {
    std::string rest = url;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) {
        rest = rest.substr(scheme.size());
    }
    const std::size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    prefix = slash == std::string::npos ? "" : rest.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    const std::size_t colon = hostport.rfind(':');
    if (colon == std::string::npos) {
        host = hostport;
        port = 80;
    } else {
        host = hostport.substr(0, colon);
        port = std::atoi(hostport.c_str() + colon + 1);
    }
}

}  // namespace

HttpBackendConfig apply_env_overrides(HttpBackendConfig config) {
    if (const char* url = std::getenv("STEPCACHE_BASE_URL"); url && *url) {
        config.base_url = url;
    }
    if (const char* model = std::getenv("STEPCACHE_MODEL"); model && *model) {
        config.model = model;
    }
    return config;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    parse_base_url(config_.base_url, host_, port_, path_prefix_);
}

BackendCall HttpChatBackend::generate(const std::string& prompt, CallType call_type) {
    const json body = {
        {"model", config_.model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
    };
    const std::string path = path_prefix_ + "/v1/chat/completions";

    const auto start = std::chrono::steady_clock::now();
    httplib::Result res;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(host_, port_);
        const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        res = client.Post(path, body.dump(), "application/json");
        if (res && res->status >= 200 && res->status < 300) {
            break;
        }
        last_error = res ? "status " + std::to_string(res->status)
                         : "transport error " + httplib::to_string(res.error());
        res = httplib::Result();
    }
    if (!res) {
        throw BackendUnavailableError(host_ + ":" + std::to_string(port_) + " (" + last_error +
                                      ")");
    }

    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
        throw BackendProtocolError("missing choices in chat-completions response");
    }
    const json& message = parsed["choices"][0].value("message", json::object());
    if (!message.contains("content") || !message["content"].is_string()) {
        throw BackendProtocolError("missing message content in chat-completions response");
    }

    BackendCall call;
    call.call_type = call_type;
    call.prompt = prompt;
    call.response = message["content"].get<std::string>();
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
        const json& usage = parsed["usage"];
        call.prompt_tokens = usage.value("prompt_tokens", estimate_tokens(prompt));
        call.completion_tokens = usage.value("completion_tokens", estimate_tokens(call.response));
    } else {
        call.prompt_tokens = estimate_tokens(prompt);
        call.completion_tokens = estimate_tokens(call.response);
    }
    call.total_tokens = call.prompt_tokens + call.completion_tokens;
    call.latency_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return call;
}

}  // namespace stepcache

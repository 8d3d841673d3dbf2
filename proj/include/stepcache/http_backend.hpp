#pragma once

#include <string>

#include "stepcache/backend.hpp"

namespace stepcache {

// Client configuration for an OpenAI-compatible chat-completions endpoint.
// Environment variables STEPCACHE_BASE_URL and STEPCACHE_MODEL override the
// base_url and model fields when set.
struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model = "default";
    double timeout_seconds = 30.0;
    int max_retries = 2;  // retries after the first attempt
};

// Applies STEPCACHE_* environment overrides to a config.
HttpBackendConfig apply_env_overrides(HttpBackendConfig config);

// POSTs {model, messages:[{role,content}]} to <base_url>/v1/chat/completions
// and reads choices[0].message.content plus usage token counts (estimated at
// ceil(chars/4) when usage is absent). Transport failures and non-2xx
// statuses are retried up to max_retries, then raise BackendUnavailableError;
// unparseable bodies raise BackendProtocolError.
class HttpChatBackend : public LlmBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);

    BackendCall generate(const std::string& prompt, CallType call_type) override;

    const HttpBackendConfig& config() const { return config_; }

private:
    HttpBackendConfig config_;
    std::string host_;
    int port_ = 80;
    std::string path_prefix_;
};

}  // namespace stepcache

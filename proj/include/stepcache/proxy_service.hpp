#pragma once

#include <memory>
#include <string>
#include <thread>

#include "stepcache/backend.hpp"
#include "stepcache/cache_store.hpp"
#include "stepcache/metrics.hpp"
#include "stepcache/orchestrator.hpp"

namespace stepcache {

// Configuration of the HTTP proxy. The upstream backend is either the
// deterministic simulator ("sim") or an OpenAI-compatible endpoint reachable
// at upstream_base_url; listen and upstream addresses must differ.
struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;  // 0 = pick an ephemeral port
    std::string upstream = "sim";  // "sim" or a http://host:port base URL
    std::string model = "default";
    std::string cache_file;  // persisted on shutdown when non-empty
    bool enable_cache = true;
    double sim_latency_seconds = 0.0;
    std::uint64_t sim_seed = 0;
};

// Chat-completions-compatible front end for the orchestrator.
//
//   POST /v1/chat/completions  standard request body plus an optional
//       {"stepcache": {task_type, required_keys, force_skip_reuse}} block;
//       the response carries {"stepcache": {path, steps_reused,
//       steps_patched, provenance}}.
//   GET /stats  counters and aggregates.
//
// Requests without the extension block are treated as task_type "other"
// (unverified reuse); with caching disabled the service is a transparent
// proxy. Shutdown persists the cache file.
class ProxyService {
public:
    explicit ProxyService(ServiceConfig config);
    ~ProxyService();

    // Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();  // idempotent; persists the cache when configured

    CacheStore& store();
    MetricsRegistry& metrics();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace stepcache

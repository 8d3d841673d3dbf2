// HTTP proxy front end: serves /v1/chat/completions with step-level reuse in
// front of a simulated or real chat-completions backend.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stepcache/proxy_service.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

// JSON config file; CLI flags override its values, STEPCACHE_* environment
// variables override the upstream endpoint last.
stepcache::ServiceConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path);
    }
    nlohmann::json j;
    in >> j;
    stepcache::ServiceConfig config;
    config.listen_host = j.value("listen_host", config.listen_host);
    config.listen_port = j.value("listen_port", config.listen_port);
    config.upstream = j.value("backend", config.upstream);
    config.model = j.value("model", config.model);
    config.cache_file = j.value("cache_file", config.cache_file);
    config.enable_cache = j.value("enable_cache", config.enable_cache);
    config.sim_latency_seconds = j.value("sim_latency_seconds", config.sim_latency_seconds);
    config.sim_seed = j.value("sim_seed", config.sim_seed);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"StepCache chat-completions proxy"};

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)")
        ->check(CLI::ExistingFile);

    stepcache::ServiceConfig config;
    auto* host = app.add_option("--host", config.listen_host, "Listen address");
    auto* port = app.add_option("--port", config.listen_port, "Listen port (0 = ephemeral)");
    auto* backend = app.add_option("--backend", config.upstream,
                                   "'sim' or an upstream base URL");
    auto* model = app.add_option("--model", config.model, "Model name for upstream requests");
    auto* cache_file = app.add_option("--cache-file", config.cache_file,
                                      "Cache journal, restored on start and persisted on "
                                      "shutdown");
    auto* no_cache = app.add_flag("--cache,!--no-cache", config.enable_cache,
                                  "Enable reuse (--no-cache for a transparent proxy)");
    auto* sim_latency =
        app.add_option("--sim-latency", config.sim_latency_seconds,
                       "Reported per-call latency of the simulated backend (s)");
    auto* sim_seed = app.add_option("--sim-seed", config.sim_seed,
                                    "Seed of the simulated backend");

    CLI11_PARSE(app, argc, argv);

    if (!config_path.empty()) {
        stepcache::ServiceConfig from_file;
        try {
            from_file = load_config_file(config_path);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 2;
        }
        if (host->count() == 0) config.listen_host = from_file.listen_host;
        if (port->count() == 0) config.listen_port = from_file.listen_port;
        if (backend->count() == 0) config.upstream = from_file.upstream;
        if (model->count() == 0) config.model = from_file.model;
        if (cache_file->count() == 0) config.cache_file = from_file.cache_file;
        if (no_cache->count() == 0) config.enable_cache = from_file.enable_cache;
        if (sim_latency->count() == 0) config.sim_latency_seconds = from_file.sim_latency_seconds;
        if (sim_seed->count() == 0) config.sim_seed = from_file.sim_seed;
    }

    try {
        stepcache::ProxyService service(config);
        const int port = service.start();
        std::printf("stepcache proxy listening on %s:%d (backend: %s, cache: %s)\n",
                    config.listen_host.c_str(), port, config.upstream.c_str(),
                    config.enable_cache ? "on" : "off");

        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        std::printf("shutting down, persisting cache\n");
        service.stop();
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

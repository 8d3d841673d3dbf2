#include "stepcache/proxy_service.hpp"

#include <filesystem>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepcache/errors.hpp"
#include "stepcache/http_backend.hpp"
#include "stepcache/sim_backend.hpp"

namespace stepcache {

namespace {

using nlohmann::json;

std::string last_user_message(const json& body) {
    if (!body.contains("messages") || !body["messages"].is_array()) return "";
    std::string content;
    for (const json& m : body["messages"]) {
        if (m.value("role", "") == "user" && m.contains("content") &&
            m["content"].is_string()) {
            content = m["content"].get<std::string>();
        }
    }
    return content;
}

Constraints constraints_from_extension(const json& ext) {
    Constraints c;
    c.task_type = task_type_from_string(ext.value("task_type", "other"));
    if (ext.contains("required_keys") && ext["required_keys"].is_array()) {
        for (const json& k : ext["required_keys"]) {
            if (k.is_string()) c.required_keys.required_keys.push_back(k.get<std::string>());
        }
    }
    c.force_skip_reuse = ext.value("force_skip_reuse", false);
    return c;
}

json error_body(const std::string& type, const std::string& message) {
    return {{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

struct ProxyService::Impl {
    ServiceConfig config;
    std::shared_ptr<CacheStore> store;
    std::shared_ptr<CallLog> log;
    std::shared_ptr<BackendGateway> gateway;
    std::shared_ptr<MetricsRegistry> metrics;
    std::unique_ptr<Orchestrator> orchestrator;
    httplib::Server server;
    std::thread serve_thread;
    std::atomic<std::uint64_t> next_request_id{1};
    bool running = false;

    void handle_completion(const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            res.status = 400;
            res.set_content(error_body("invalid_request", "body is not a JSON object").dump(),
                            "application/json");
            return;
        }
        const std::string prompt = last_user_message(body);
        if (prompt.empty()) {
            res.status = 400;
            res.set_content(
                error_body("invalid_request", "no user message content found").dump(),
                "application/json");
            return;
        }
        Constraints constraints;
        if (body.contains("stepcache") && body["stepcache"].is_object()) {
            constraints = constraints_from_extension(body["stepcache"]);
        }

        RequestOutcome outcome;
        try {
            if (config.enable_cache) {
                outcome = orchestrator->handle(prompt, constraints.task_type, constraints);
            } else {
                // Transparent baseline: forward and return the upstream
                // response unchanged.
                const std::uint64_t rid = next_request_id.fetch_add(1);
                BackendCall call =
                    gateway->generate(prompt, CallType::BaselineGeneration, rid);
                ++metrics->counters().baseline_generation;
                outcome.request_id = rid;
                outcome.path = OutcomePath::Miss;
                outcome.answer = call.response;
                outcome.total_tokens = call.total_tokens;
                outcome.latency_seconds = call.latency_seconds;
                outcome.final_check = CheckResult::ok();
                outcome.quality_check = CheckResult::ok();
                outcome.calls.push_back(std::move(call));
            }
        } catch (const BackendUnavailableError& e) {
            res.status = 502;
            res.set_content(error_body("backend_unavailable", e.what()).dump(),
                            "application/json");
            return;
        } catch (const BackendProtocolError& e) {
            res.status = 502;
            res.set_content(error_body("backend_protocol_error", e.what()).dump(),
                            "application/json");
            return;
        } catch (const std::invalid_argument& e) {
            res.status = 400;
            res.set_content(error_body("invalid_request", e.what()).dump(),
                            "application/json");
            return;
        }

        PerRequestRecord record;
        record.request_id = outcome.request_id;
        record.task = to_string(constraints.task_type);
        record.path = to_string(outcome.path);
        record.latency_seconds = outcome.latency_seconds;
        record.tokens = outcome.total_tokens;
        record.quality_pass = outcome.quality_check.pass;
        record.final_pass = outcome.final_check.pass;
        metrics->record(std::move(record));

        std::uint64_t prompt_tokens = 0;
        std::uint64_t completion_tokens = 0;
        for (const BackendCall& c : outcome.calls) {
            prompt_tokens += c.prompt_tokens;
            completion_tokens += c.completion_tokens;
        }
        json provenance = json::array();
        for (const StepOrigin origin : outcome.provenance) {
            provenance.push_back(to_string(origin));
        }
        const json reply = {
            {"id", "stepcache-" + std::to_string(outcome.request_id)},
            {"object", "chat.completion"},
            {"model", config.model},
            {"choices",
             json::array({{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", outcome.answer}}},
                           {"finish_reason", "stop"}}})},
            {"usage",
             {{"prompt_tokens", prompt_tokens},
              {"completion_tokens", completion_tokens},
              {"total_tokens", prompt_tokens + completion_tokens}}},
            {"stepcache",
             {{"path", to_string(outcome.path)},
              {"steps_reused", outcome.steps_reused},
              {"steps_patched", outcome.steps_patched},
              {"provenance", std::move(provenance)},
              {"final_check", outcome.final_check.pass ? "PASS" : "FAIL"},
              {"unverified_reuse", outcome.unverified_reuse}}},
        };
        res.set_content(reply.dump(), "application/json");
    }

    void handle_stats(httplib::Response& res) const {
        const CountersSnapshot c = snapshot(metrics->counters());
        json stats = {
            {"requests", metrics->size()},
            {"cache_entries", store->size()},
            {"backend_calls", log->size()},
            {"counters",
             {{"baseline_generation", c.baseline_generation},
              {"cache_hit_reuse", c.cache_hit_reuse},
              {"verification", c.verification},
              {"patch_calls", c.patch_calls},
              {"repair_calls", c.repair_calls},
              {"skip_reuse_fallbacks", c.skip_reuse_fallbacks}}},
        };
        if (metrics->size() > 0) {
            const Aggregates a = aggregate_records(metrics->records());
            stats["aggregates"] = {{"mean_latency", a.mean_latency},
                                   {"median_latency", a.median_latency},
                                   {"p95_latency", a.p95_latency},
                                   {"total_tokens", a.total_tokens},
                                   {"tokens_per_request", a.tokens_per_request},
                                   {"quality_rate", a.quality_rate},
                                   {"final_rate", a.final_rate},
                                   {"reuse_only_pct", a.reuse_only_pct},
                                   {"patch_pct", a.patch_pct},
                                   {"skip_pct", a.skip_pct},
                                   {"miss_pct", a.miss_pct}};
        } else {
            stats["aggregates"] = nullptr;
        }
        res.set_content(stats.dump(), "application/json");
    }
};

ProxyService::ProxyService(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    const ServiceConfig& cfg = impl_->config;

    if (cfg.upstream != "sim" && cfg.listen_port != 0) {
        const std::string listen_addr =
            cfg.listen_host + ":" + std::to_string(cfg.listen_port);
        if (cfg.upstream.find(listen_addr) != std::string::npos) {
            throw std::invalid_argument("upstream and listen addresses must differ");
        }
    }

    if (!cfg.cache_file.empty() && std::filesystem::exists(cfg.cache_file)) {
        impl_->store = std::make_shared<CacheStore>(CacheStore::restore(cfg.cache_file));
    } else {
        impl_->store = std::make_shared<CacheStore>(std::make_shared<TrigramEmbedder>());
    }

    std::shared_ptr<LlmBackend> backend;
    if (cfg.upstream == "sim") {
        SimulatedBackendConfig sim;
        sim.seed = cfg.sim_seed;
        sim.per_call_latency_seconds = cfg.sim_latency_seconds;
        backend = std::make_shared<SimulatedBackend>(sim);
    } else {
        HttpBackendConfig http;
        http.base_url = cfg.upstream;
        http.model = cfg.model;
        backend = std::make_shared<HttpChatBackend>(apply_env_overrides(http));
    }
    impl_->log = std::make_shared<CallLog>();
    impl_->gateway = std::make_shared<BackendGateway>(backend, impl_->log);
    impl_->metrics = std::make_shared<MetricsRegistry>();
    impl_->orchestrator = std::make_unique<Orchestrator>(impl_->store, impl_->gateway,
                                                         impl_->metrics->counters_ptr());
}

ProxyService::~ProxyService() { stop(); }

int ProxyService::start() {
    Impl& impl = *impl_;
    impl.server.Post("/v1/chat/completions",
                     [&impl](const httplib::Request& req, httplib::Response& res) {
                         impl.handle_completion(req, res);
                     });
    impl.server.Get("/stats", [&impl](const httplib::Request&, httplib::Response& res) {
        impl.handle_stats(res);
    });

    int port = impl.config.listen_port;
    if (port == 0) {
        port = impl.server.bind_to_any_port(impl.config.listen_host);
        if (port < 0) {
            throw IoError("cannot bind " + impl.config.listen_host);
        }
    } else if (!impl.server.bind_to_port(impl.config.listen_host, port)) {
        throw IoError("cannot bind " + impl.config.listen_host + ":" + std::to_string(port));
    }
    impl.serve_thread = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
    impl.running = true;
    return port;
}

void ProxyService::stop() {
    Impl& impl = *impl_;
    if (!impl.running) return;
    impl.server.stop();
    if (impl.serve_thread.joinable()) {
        impl.serve_thread.join();
    }
    impl.running = false;
    if (!impl.config.cache_file.empty()) {
        impl.store->persist(impl.config.cache_file);
    }
}

CacheStore& ProxyService::store() { return *impl_->store; }

MetricsRegistry& ProxyService::metrics() { return *impl_->metrics; }

}  // namespace stepcache

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

#include "stepcache/backend.hpp"
#include "stepcache/errors.hpp"
#include "stepcache/http_backend.hpp"
#include "stepcache/math_verifier.hpp"
#include "stepcache/prompts.hpp"
#include "stepcache/rational.hpp"
#include "stepcache/sim_backend.hpp"

using namespace stepcache;

namespace {

MathState state_of(std::int64_t a, std::int64_t b, std::int64_t c, char var) {
    return make_math_state(Rational(a), Rational(b), Rational(c), var);
}

}  // namespace

TEST_CASE("token estimator is ceil(chars / 4)") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("abc") == 1);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("call log appends with increasing ids") {
    CallLog log;
    CallRecord r;
    r.request_id = 9;
    CHECK(log.append(r) == 1);
    CHECK(log.append(r) == 2);
    CHECK(log.size() == 2);
    CHECK(log.snapshot()[1].call_id == 2);
    CHECK(log.snapshot()[0].request_id == 9);
}

TEST_CASE("simulated backend honors scripted responses") {
    SimulatedBackendConfig cfg;
    cfg.scripted["Solve 2x + 3 = 13 for x"] = "2x = 10\n\nx = 5";
    SimulatedBackend backend(cfg);
    const BackendCall c = backend.generate("Solve 2x + 3 = 13 for x",
                                           CallType::BaselineGeneration);
    CHECK(c.response == "2x = 10\n\nx = 5");
    CHECK(c.total_tokens == c.prompt_tokens + c.completion_tokens);
    CHECK(c.prompt_tokens == estimate_tokens("Solve 2x + 3 = 13 for x"));
}

TEST_CASE("simulated backend solves math prompts consistently") {
    SimulatedBackend backend{SimulatedBackendConfig{}};
    const BackendCall c = backend.generate("Solve 2x + 3 = 13 for x",
                                           CallType::BaselineGeneration);
    CHECK(c.response == "2x = 10\n\nx = 5");
    CHECK(final_math_check(c.response, state_of(2, 3, 13, 'x')).pass);

    const BackendCall neg = backend.generate("Solve 3y - 4 = 11 for y",
                                             CallType::BaselineGeneration);
    CHECK(final_math_check(neg.response, state_of(3, -4, 11, 'y')).pass);
}

TEST_CASE("simulated backend emits fenced JSON for json prompts") {
    SimulatedBackend backend{SimulatedBackendConfig{}};
    const BackendCall c = backend.generate("Return a JSON object with keys a, b, c",
                                           CallType::BaselineGeneration);
    CHECK(c.response.rfind("```json", 0) == 0);
    const auto parsed = nlohmann::json::parse(c.response.substr(8, c.response.size() - 8 - 4));
    CHECK(parsed.contains("a"));
    CHECK(parsed.contains("b"));
    CHECK(parsed.contains("c"));
}

TEST_CASE("simulated backend is a pure function of prompt, seed and faults") {
    SimulatedBackendConfig cfg;
    cfg.seed = 7;
    cfg.baseline.wrong_constant = 0.5;
    SimulatedBackend one(cfg);
    SimulatedBackend two(cfg);
    const std::vector<std::string> prompts = {
        "Solve 2x + 3 = 13 for x", "Solve 5t + 1 = 11 for t",
        "Return a JSON object with keys a, b", "free text request"};
    for (const auto& p : prompts) {
        for (const CallType t : {CallType::BaselineGeneration, CallType::Patch,
                                 CallType::SkipReuseFallback}) {
            const BackendCall c1 = one.generate(p, t);
            const BackendCall c2 = two.generate(p, t);
            CHECK(c1.response == c2.response);
            CHECK(c1.total_tokens == c2.total_tokens);
        }
    }
    // different seeds may change fault decisions but stay internally stable
    SimulatedBackendConfig other = cfg;
    other.seed = 8;
    SimulatedBackend three(other);
    CHECK(three.generate(prompts[0], CallType::BaselineGeneration).response ==
          three.generate(prompts[0], CallType::BaselineGeneration).response);
}

TEST_CASE("wrong_constant fault breaks only the final assignment") {
    SimulatedBackendConfig cfg;
    cfg.baseline.wrong_constant = 1.0;
    SimulatedBackend backend(cfg);
    const BackendCall c = backend.generate("Solve 2x + 3 = 13 for x",
                                           CallType::BaselineGeneration);
    CHECK(c.response == "2x = 10\n\nx = 6");
    const CheckResult r = final_math_check(c.response, state_of(2, 3, 13, 'x'));
    CHECK_FALSE(r.pass);
    CHECK(r.reason == "final_assignment_mismatch");
}

TEST_CASE("invalid_json and missing_key faults") {
    SimulatedBackendConfig bad_json;
    bad_json.baseline.invalid_json = 1.0;
    const BackendCall broken = SimulatedBackend(bad_json).generate(
        "Return a JSON object with keys a, b", CallType::BaselineGeneration);
    CHECK_FALSE(nlohmann::json::accept(broken.response.substr(8, broken.response.size() - 12)));

    SimulatedBackendConfig missing;
    missing.baseline.missing_key = 1.0;
    const BackendCall omitted = SimulatedBackend(missing).generate(
        "Return a JSON object with keys a, b", CallType::BaselineGeneration);
    CHECK(omitted.response.find("\"a\"") != std::string::npos);
    CHECK(omitted.response.find("\"b\"") == std::string::npos);
}

TEST_CASE("fault rates apply per call type") {
    SimulatedBackendConfig cfg;
    cfg.patch.missing_key = 1.0;  // repair stays clean
    SimulatedBackend backend(cfg);
    CHECK(backend.would_fault("missing_key", CallType::Patch, "p"));
    CHECK_FALSE(backend.would_fault("missing_key", CallType::Repair, "p"));
    CHECK_FALSE(backend.would_fault("missing_key", CallType::BaselineGeneration, "p"));
}

TEST_CASE("simulated latency is reported on every call") {
    SimulatedBackendConfig cfg;
    cfg.per_call_latency_seconds = 1.5;
    SimulatedBackend backend(cfg);
    CHECK(backend.generate("anything", CallType::BaselineGeneration).latency_seconds == 1.5);
}

TEST_CASE("math patch prompt carries the full state hint") {
    const MathState st = state_of(2, 3, 13, 'x');
    const PatchPrompt p = build_math_patch_prompt(
        "Solve 2x + 3 = 13 for x", st, {Step{1, "2x = 10", StepKind::Generic}},
        Step{2, "x = 6", StepKind::Generic});
    CHECK(p.kind == PatchPromptKind::MathBlock);
    CHECK(p.body.find("expected_solution=5") != std::string::npos);
    CHECK(p.body.find("expected_intermediate=10") != std::string::npos);
    CHECK(p.body.find("a=2") != std::string::npos);
    CHECK(p.body.find("b=3") != std::string::npos);
    CHECK(p.body.find("c=13") != std::string::npos);
    CHECK(p.body.find("var=x") != std::string::npos);
    CHECK(p.body.find("Solve 2x + 3 = 13 for x") != std::string::npos);
    CHECK(p.body.find("2x = 10") != std::string::npos);
    CHECK(p.body.find("x = 6") != std::string::npos);
    CHECK(p.body.find("end with \"x = 5\"") != std::string::npos);
}

TEST_CASE("math patch prompt: negative b intermediate computed by hand") {
    // c - b = 11 - (-4) = 15
    const MathState st = state_of(3, -4, 11, 'y');
    const PatchPrompt p = build_math_patch_prompt("Solve 3y - 4 = 11 for y", st, {},
                                                  Step{1, "", StepKind::Generic});
    CHECK(p.body.find("expected_intermediate=15") != std::string::npos);
    CHECK(p.body.find("(none)") != std::string::npos);
}

TEST_CASE("json patch prompt lists keys and embeds the cached object") {
    const PatchPrompt p = build_json_patch_prompt(
        "Return a JSON object with keys a, b, c, d", {{"a", "b", "c", "d"}},
        R"({"a":1,"b":2,"c":3})");
    CHECK(p.kind == PatchPromptKind::JsonStrict);
    CHECK(p.body.find("Required keys: a, b, c, d") != std::string::npos);
    CHECK(p.body.find(R"({"a":1,"b":2,"c":3})") != std::string::npos);
    CHECK(p.body.find("valid JSON only") != std::string::npos);
}

TEST_CASE("json patch prompt omits the keys clause when empty") {
    const PatchPrompt p = build_json_patch_prompt("prompt", {{}}, "");
    CHECK(p.body.find("Required keys") == std::string::npos);
    CHECK(p.body.find("valid JSON only") != std::string::npos);
    CHECK(p.body.find("(none)") != std::string::npos);
}

TEST_CASE("json repair prompt embeds the bad output and the error") {
    const PatchPrompt p = build_json_repair_prompt("prompt text", {{"a"}}, "{broken",
                                                   "missing_keys: [a]");
    CHECK(p.kind == PatchPromptKind::JsonRepair);
    CHECK(p.body.find("{broken") != std::string::npos);
    CHECK(p.body.find("missing_keys: [a]") != std::string::npos);
    CHECK(p.body.find("prompt text") != std::string::npos);
}

TEST_CASE("simulated backend answers a json patch by merging required keys") {
    SimulatedBackend backend{SimulatedBackendConfig{}};
    const PatchPrompt p = build_json_patch_prompt(
        "Return a JSON object with keys a, b, c, d", {{"a", "b", "c", "d"}},
        R"({"a":9,"b":2,"c":3})");
    const BackendCall c = backend.generate(p.body, CallType::Patch);
    const auto parsed = nlohmann::json::parse(c.response);
    CHECK(parsed["a"] == 9);  // cached value preserved
    CHECK(parsed.contains("d"));
    CHECK(c.response.find("```") == std::string::npos);
}

TEST_CASE("simulated backend patches only the missing suffix of a math solution") {
    SimulatedBackend backend{SimulatedBackendConfig{}};
    const MathState st = state_of(2, 3, 13, 'x');
    const PatchPrompt with_prefix = build_math_patch_prompt(
        "Solve 2x + 3 = 13 for x", st, {Step{1, "2x = 10", StepKind::Generic}},
        Step{2, "x = 6", StepKind::Generic});
    CHECK(backend.generate(with_prefix.body, CallType::Patch).response == "x = 5");

    const PatchPrompt from_scratch = build_math_patch_prompt(
        "Solve 2x + 3 = 13 for x", st, {}, Step{1, "", StepKind::Generic});
    CHECK(backend.generate(from_scratch.body, CallType::Patch).response ==
          "2x = 10\n\nx = 5");
}

TEST_CASE("gateway appends exactly one log record per call with the request id") {
    auto log = std::make_shared<CallLog>();
    BackendGateway gateway(std::make_shared<SimulatedBackend>(SimulatedBackendConfig{}), log);
    const BackendCall c = gateway.generate("Solve 2x + 3 = 13 for x",
                                           CallType::BaselineGeneration, 42);
    CHECK(log->size() == 1);
    const CallRecord r = log->snapshot().front();
    CHECK(r.request_id == 42);
    CHECK(r.call_id == c.call_id);
    CHECK(r.total_tokens == c.total_tokens);
    CHECK(r.total_tokens == r.prompt_tokens + r.completion_tokens);
    CHECK_FALSE(r.failed);
}

namespace {

// In-process chat-completions endpoint for client tests.
class FakeServer {
public:
    explicit FakeServer(int fail_first_n = 0, bool garbage_body = false, bool with_usage = true)
        : fail_first_(fail_first_n), garbage_(garbage_body), usage_(with_usage) {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         ++hits_;
                         if (hits_ <= fail_first_) {
                             res.status = 500;
                             res.set_content("overloaded", "text/plain");
                             return;
                         }
                         if (garbage_) {
                             res.set_content("not json at all", "application/json");
                             return;
                         }
                         const auto body = nlohmann::json::parse(req.body);
                         const std::string prompt = body["messages"][0]["content"];
                         nlohmann::json reply = {
                             {"choices",
                              nlohmann::json::array(
                                  {{{"message",
                                     {{"role", "assistant"}, {"content", "echo: " + prompt}}}}})},
                         };
                         if (usage_) {
                             reply["usage"] = {{"prompt_tokens", 11},
                                               {"completion_tokens", 7},
                                               {"total_tokens", 18}};
                         }
                         res.set_content(reply.dump(), "application/json");
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    int port() const { return port_; }
    int hits() const { return hits_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    int fail_first_;
    bool garbage_;
    bool usage_;
};

}  // namespace

TEST_CASE("http backend parses responses and usage metadata") {
    FakeServer server;
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port());
    HttpChatBackend backend(cfg);
    const BackendCall c = backend.generate("hello", CallType::BaselineGeneration);
    CHECK(c.response == "echo: hello");
    CHECK(c.prompt_tokens == 11);
    CHECK(c.completion_tokens == 7);
    CHECK(c.total_tokens == 18);
    CHECK(c.latency_seconds > 0.0);
}

TEST_CASE("http backend falls back to the token estimator without usage") {
    FakeServer server(0, false, /*with_usage=*/false);
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port());
    HttpChatBackend backend(cfg);
    const BackendCall c = backend.generate("hello", CallType::BaselineGeneration);
    CHECK(c.prompt_tokens == estimate_tokens("hello"));
    CHECK(c.completion_tokens == estimate_tokens("echo: hello"));
}

TEST_CASE("http backend retries failed attempts") {
    FakeServer server(/*fail_first_n=*/2);
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port());
    cfg.max_retries = 2;
    HttpChatBackend backend(cfg);
    const BackendCall c = backend.generate("hi", CallType::BaselineGeneration);
    CHECK(c.response == "echo: hi");
    CHECK(server.hits() == 3);
}

TEST_CASE("http backend reports unavailability after exhausting retries") {
    FakeServer server(/*fail_first_n=*/100);
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port());
    cfg.max_retries = 2;
    HttpChatBackend backend(cfg);
    CHECK_THROWS_AS(backend.generate("hi", CallType::BaselineGeneration),
                    BackendUnavailableError);
    CHECK(server.hits() == 3);
}

TEST_CASE("http backend reports unreachable endpoints") {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";  // nothing listens there
    cfg.max_retries = 1;
    cfg.timeout_seconds = 0.2;
    HttpChatBackend backend(cfg);
    CHECK_THROWS_AS(backend.generate("hi", CallType::BaselineGeneration),
                    BackendUnavailableError);
}

TEST_CASE("http backend rejects malformed bodies") {
    FakeServer server(0, /*garbage_body=*/true);
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(server.port());
    HttpChatBackend backend(cfg);
    CHECK_THROWS_AS(backend.generate("hi", CallType::BaselineGeneration),
                    BackendProtocolError);
}

TEST_CASE("environment variables override the endpoint config") {
    setenv("STEPCACHE_BASE_URL", "http://example.test:9999", 1);
    setenv("STEPCACHE_MODEL", "qwen", 1);
    const HttpBackendConfig cfg = apply_env_overrides({});
    CHECK(cfg.base_url == "http://example.test:9999");
    CHECK(cfg.model == "qwen");
    unsetenv("STEPCACHE_BASE_URL");
    unsetenv("STEPCACHE_MODEL");
}

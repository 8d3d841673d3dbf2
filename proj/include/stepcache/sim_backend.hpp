#pragma once

#include <map>
#include <string>

#include "stepcache/backend.hpp"

namespace stepcache {

// Fault rates in [0, 1] applied to the responses of one call type.
// wrong_constant mutates a math final assignment to v_star + 1; invalid_json
// drops the closing brace of a JSON payload; missing_key omits the last
// required key.
struct SimFaults {
    double wrong_constant = 0.0;
    double invalid_json = 0.0;
    double missing_key = 0.0;
};

struct SimulatedBackendConfig {
    std::uint64_t seed = 0;
    // Reported per-call latency in seconds. The simulator does not sleep, so
    // benchmark runs stay fast while latency statistics remain meaningful.
    double per_call_latency_seconds = 0.0;
    SimFaults baseline;  // BaselineGeneration
    SimFaults patch;     // Patch
    SimFaults repair;    // Repair
    SimFaults skip;      // SkipReuseFallback
    // Exact-prompt overrides checked before any heuristic.
    std::map<std::string, std::string> scripted;

    void set_all_faults(const SimFaults& f) {
        baseline = f;
        patch = f;
        repair = f;
        skip = f;
    }
};

// Deterministic stand-in for a real model endpoint. The response is a pure
// function of (prompt, call type, seed, fault configuration): replaying a run
// reproduces byte-identical responses and token counts. Understands the math
// and JSON task prompts used by the benchmark plus the patch/repair templates
// from prompt_templates.hpp.
class SimulatedBackend : public LlmBackend {
public:
    explicit SimulatedBackend(SimulatedBackendConfig config = {});

    BackendCall generate(const std::string& prompt, CallType call_type) override;

    // Fault decision for (fault, call type, prompt); exposed so tests can
    // compute expected fault schedules exactly.
    bool would_fault(const std::string& fault_name, CallType call_type,
                     const std::string& prompt) const;

    const SimulatedBackendConfig& config() const { return config_; }

private:
    std::string respond(const std::string& prompt, CallType call_type) const;
    const SimFaults& faults_for(CallType call_type) const;

    SimulatedBackendConfig config_;
};

}  // namespace stepcache

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stepcache/backend.hpp"
#include "stepcache/cache_store.hpp"
#include "stepcache/check_result.hpp"
#include "stepcache/metrics.hpp"

namespace stepcache {

enum class OutcomePath {
    Miss,
    ReuseOnly,
    Patched,
    SkipReuse,
};

std::string to_string(OutcomePath path);

// Origin of a step in the final answer: taken from the cache, regenerated by
// a patch/repair call, produced by a fresh generation, or synthesized by the
// deterministic math fallback.
enum class StepOrigin {
    Cached,
    Patched,
    Generated,
    Fallback,
};

std::string to_string(StepOrigin origin);

struct RequestOutcome {
    std::uint64_t request_id = 0;
    OutcomePath path = OutcomePath::Miss;
    std::string answer;
    std::vector<BackendCall> calls;
    int steps_reused = 0;
    int steps_patched = 0;
    CheckResult final_check;    // stitched-output integrity check, in-pipeline
    CheckResult quality_check;  // task-level check recomputed on the answer
    double latency_seconds = 0.0;
    std::uint64_t total_tokens = 0;
    std::vector<StepOrigin> provenance;  // one tag per answer step
    bool unverified_reuse = false;       // reuse of an "other" task, no checks ran
};

// Mutually exclusive per-request classification. The skip flag wins
// regardless of repair calls; a baseline generation marks a miss; any patch
// call marks the request patched; otherwise it was served purely from cache.
OutcomePath classify_outcome(const std::vector<BackendCall>& calls, bool skip_flag);

struct OrchestratorConfig {
    // Skip reuse when the fraction of inconsistent steps reaches this value.
    double inconsistent_fraction_threshold = 0.5;
};

// The inference pipeline: retrieve the best cached request, verify its steps
// for the new prompt, reuse what passes, patch what fails, stitch, run the
// final integrity check with one bounded repair, and fall back to the
// deterministic math answer when everything else failed. Reentrant;
// concurrent requests share the store under its readers-writer contract.
class Orchestrator {
public:
    Orchestrator(std::shared_ptr<CacheStore> store, std::shared_ptr<BackendGateway> gateway,
                 std::shared_ptr<Counters> counters = nullptr, OrchestratorConfig config = {});

    RequestOutcome handle(const std::string& prompt, TaskType task_type,
                          const Constraints& constraints);

    // Cache-miss path: one baseline generation, task-aware segmentation, and
    // insertion of the new entry.
    RequestOutcome handle_miss(const std::string& prompt, TaskType task_type,
                               const Constraints& constraints);

    CacheStore& store() { return *store_; }
    BackendGateway& gateway() { return *gateway_; }

private:
    struct RequestContext;

    RequestOutcome generate_full(RequestContext& ctx, CallType generation_type, bool skip_flag);
    void finalize(RequestContext& ctx, RequestOutcome& outcome, bool skip_flag);

    std::shared_ptr<CacheStore> store_;
    std::shared_ptr<BackendGateway> gateway_;
    std::shared_ptr<Counters> counters_;
    OrchestratorConfig config_;
    std::atomic<std::uint64_t> next_request_id_{1};
};

}  // namespace stepcache

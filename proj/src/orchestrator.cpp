#include "stepcache/orchestrator.hpp"

#include <chrono>

#include "stepcache/errors.hpp"
#include "stepcache/json_verifier.hpp"
#include "stepcache/math_verifier.hpp"
#include "stepcache/prompts.hpp"
#include "stepcache/segmenter.hpp"

namespace stepcache {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void reindex(std::vector<Step>& steps) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        steps[i].index = static_cast<int>(i + 1);
    }
}

std::vector<Step> segment_or_empty(const std::string& text) {
    try {
        return segment_generic(text);
    } catch (const EmptyResponseError&) {
        return {};
    }
}

}  // namespace

std::string to_string(OutcomePath path) {
    switch (path) {
        case OutcomePath::Miss: return "miss";
        case OutcomePath::ReuseOnly: return "reuse_only";
        case OutcomePath::Patched: return "patched";
        case OutcomePath::SkipReuse: return "skip_reuse";
    }
    return "miss";
}

std::string to_string(StepOrigin origin) {
    switch (origin) {
        case StepOrigin::Cached: return "cached";
        case StepOrigin::Patched: return "patched";
        case StepOrigin::Generated: return "generated";
        case StepOrigin::Fallback: return "fallback";
    }
    return "cached";
}

OutcomePath classify_outcome(const std::vector<BackendCall>& calls, bool skip_flag) {
    if (skip_flag) return OutcomePath::SkipReuse;
    for (const BackendCall& c : calls) {
        if (c.call_type == CallType::BaselineGeneration) return OutcomePath::Miss;
    }
    if (calls.empty()) return OutcomePath::ReuseOnly;
    return OutcomePath::Patched;
}

struct Orchestrator::RequestContext {
    std::string prompt;
    TaskType task = TaskType::Other;
    Constraints constraints;
    std::uint64_t request_id = 0;
    Clock::time_point start;
    Embedding query;
    std::optional<MathState> state;  // parsed from the new prompt, math only
    std::vector<BackendCall> calls;
    double backend_wall = 0.0;
    bool repair_used = false;
    std::vector<Step> steps;
    std::vector<StepOrigin> provenance;
    bool unverified_reuse = false;

    BackendCall call(BackendGateway& gateway, Counters* counters, const std::string& body,
                     CallType type) {
        if (counters) {
            switch (type) {
                case CallType::BaselineGeneration: ++counters->baseline_generation; break;
                case CallType::Patch: ++counters->patch_calls; break;
                case CallType::Repair: ++counters->repair_calls; break;
                case CallType::SkipReuseFallback: ++counters->skip_reuse_fallbacks; break;
                default: break;
            }
        }
        const auto t0 = Clock::now();
        try {
            BackendCall c = gateway.generate(body, type, request_id);
            backend_wall += seconds_since(t0);
            calls.push_back(c);
            return c;
        } catch (...) {
            backend_wall += seconds_since(t0);
            throw;
        }
    }

    // Keeps the failed attempt visible in the outcome's call list; the
    // structured log already holds the error record.
    void note_failed_call(const std::string& body, CallType type) {
        BackendCall failed;
        failed.call_type = type;
        failed.prompt = body;
        calls.push_back(std::move(failed));
    }

    CheckResult task_check(const std::string& answer) const {
        switch (task) {
            case TaskType::Math:
                // A math prompt we could not parse has no checkable state.
                return state ? final_math_check(answer, *state) : CheckResult::ok();
            case TaskType::Json:
                return final_json_check(answer, constraints.required_keys);
            case TaskType::Other:
                return CheckResult::ok();
        }
        return CheckResult::ok();
    }
};

Orchestrator::Orchestrator(std::shared_ptr<CacheStore> store,
                           std::shared_ptr<BackendGateway> gateway,
                           std::shared_ptr<Counters> counters, OrchestratorConfig config)
    : store_(std::move(store)),
      gateway_(std::move(gateway)),
      counters_(std::move(counters)),
      config_(config) {}

RequestOutcome Orchestrator::handle(const std::string& prompt, TaskType task_type,
                                    const Constraints& constraints) {
    if (task_type != TaskType::Json && !constraints.required_keys.required_keys.empty()) {
        throw std::invalid_argument("required_keys set on a non-json request");
    }

    RequestContext ctx;
    ctx.prompt = prompt;
    ctx.task = task_type;
    ctx.constraints = constraints;
    ctx.request_id = next_request_id_.fetch_add(1);
    ctx.start = Clock::now();
    ctx.query = store_->embed(prompt);

    const auto hit = store_->retrieve_best(ctx.query);
    if (!hit) {
        if (ctx.task == TaskType::Math) ctx.state = parse_math_prompt(prompt);
        return generate_full(ctx, CallType::BaselineGeneration, /*skip_flag=*/false);
    }
    const CacheEntry& cached = hit->entry;

    // Math-only conservative skip-reuse: forced skips, semantic changes, a
    // first-step inconsistency, or too many inconsistent steps all predict
    // that reuse would be unproductive.
    std::optional<MathVerdict> verdict;
    bool skip = false;
    if (ctx.task == TaskType::Math) {
        ctx.state = parse_math_prompt(prompt);
        const auto cached_state = parse_math_prompt(cached.prompt);
        if (constraints.force_skip_reuse || !ctx.state || !cached_state ||
            !same_equation(*ctx.state, *cached_state)) {
            skip = true;
        } else {
            verdict = verify_steps(cached.steps, *ctx.state);
            if (counters_) counters_->verification += cached.steps.size();
            if (verdict->first_inconsistent &&
                (*verdict->first_inconsistent == 1 ||
                 verdict->inconsistent_fraction >= config_.inconsistent_fraction_threshold)) {
                skip = true;
            }
        }
    }
    if (skip) {
        store_->record_skip(cached.id);
        return generate_full(ctx, CallType::SkipReuseFallback, /*skip_flag=*/true);
    }

    if (ctx.task == TaskType::Math) {
        if (!verdict->first_inconsistent) {
            ctx.steps = cached.steps;
            ctx.provenance.assign(ctx.steps.size(), StepOrigin::Cached);
        } else {
            // Contiguous block patch for the failing suffix i..m.
            const int first_failed_index = *verdict->first_inconsistent;
            std::vector<Step> prefix(cached.steps.begin(),
                                     cached.steps.begin() + (first_failed_index - 1));
            const PatchPrompt patch = build_math_patch_prompt(
                prompt, *ctx.state, prefix, cached.steps[first_failed_index - 1]);
            std::vector<Step> patched_steps;
            try {
                const BackendCall c = ctx.call(*gateway_, counters_.get(), patch.body,
                                               CallType::Patch);
                patched_steps = segment_or_empty(c.response);
            } catch (const BackendUnavailableError&) {
                // The deterministic fallback in finalize still yields a
                // correct answer; keep the attempt in the call list.
                ctx.note_failed_call(patch.body, CallType::Patch);
            }
            ctx.steps = std::move(prefix);
            ctx.provenance.assign(ctx.steps.size(), StepOrigin::Cached);
            for (Step& s : patched_steps) {
                ctx.steps.push_back(std::move(s));
                ctx.provenance.push_back(StepOrigin::Patched);
            }
            reindex(ctx.steps);
            store_->record_patch(cached.id);
        }
    } else if (ctx.task == TaskType::Json) {
        const Step* payload =
            cached.steps.size() == 1 && cached.steps.front().kind == StepKind::JsonPayload
                ? &cached.steps.front()
                : nullptr;
        if (counters_) ++counters_->verification;
        const CheckResult verdict_json =
            payload ? verify_json_step(*payload, constraints.required_keys)
                    : CheckResult::fail("parse_error: cached entry has no JSON payload");
        if (verdict_json.pass) {
            ctx.steps = {*payload};
            ctx.provenance = {StepOrigin::Cached};
        } else {
            // Strict structured patch of the single JSON step.
            const PatchPrompt patch = build_json_patch_prompt(
                prompt, constraints.required_keys, payload ? payload->text : "");
            const BackendCall c =
                ctx.call(*gateway_, counters_.get(), patch.body, CallType::Patch);
            try {
                ctx.steps = {extract_json_step(c.response)};
            } catch (const NoJsonFoundError&) {
                ctx.steps = {Step{1, c.response, StepKind::Generic}};
            }
            ctx.provenance = {StepOrigin::Patched};
            store_->record_patch(cached.id);
        }
    } else {
        // No verifier exists for open-ended text; reuse is possible but
        // flagged as unverified.
        ctx.steps = cached.steps;
        ctx.provenance.assign(ctx.steps.size(), StepOrigin::Cached);
        ctx.unverified_reuse = true;
    }

    RequestOutcome outcome;
    finalize(ctx, outcome, /*skip_flag=*/false);
    if (outcome.path == OutcomePath::ReuseOnly) {
        store_->record_hit(cached.id);
        if (counters_) ++counters_->cache_hit_reuse;
    }
    return outcome;
}

RequestOutcome Orchestrator::handle_miss(const std::string& prompt, TaskType task_type,
                                         const Constraints& constraints) {
    RequestContext ctx;
    ctx.prompt = prompt;
    ctx.task = task_type;
    ctx.constraints = constraints;
    ctx.request_id = next_request_id_.fetch_add(1);
    ctx.start = Clock::now();
    ctx.query = store_->embed(prompt);
    if (ctx.task == TaskType::Math) ctx.state = parse_math_prompt(prompt);
    return generate_full(ctx, CallType::BaselineGeneration, /*skip_flag=*/false);
}

RequestOutcome Orchestrator::generate_full(RequestContext& ctx, CallType generation_type,
                                           bool skip_flag) {
    // The request cannot be served without this call, so unavailability
    // propagates to the caller.
    const BackendCall generation =
        ctx.call(*gateway_, counters_.get(), ctx.prompt, generation_type);

    if (ctx.task == TaskType::Json) {
        try {
            ctx.steps = {extract_json_step(generation.response)};
        } catch (const NoJsonFoundError&) {
            // One repair attempt to obtain a parseable payload; give up with
            // a failing final check if that does not work either.
            const PatchPrompt repair =
                build_json_repair_prompt(ctx.prompt, ctx.constraints.required_keys,
                                         generation.response,
                                         "parse_error: no JSON payload found");
            ctx.repair_used = true;
            try {
                const BackendCall rc =
                    ctx.call(*gateway_, counters_.get(), repair.body, CallType::Repair);
                try {
                    ctx.steps = {extract_json_step(rc.response)};
                } catch (const NoJsonFoundError&) {
                    ctx.steps = {Step{1, rc.response, StepKind::Generic}};
                }
            } catch (const BackendUnavailableError&) {
                ctx.note_failed_call(repair.body, CallType::Repair);
                ctx.steps = {Step{1, generation.response, StepKind::Generic}};
            }
        }
        ctx.provenance.assign(ctx.steps.size(), StepOrigin::Generated);
    } else {
        ctx.steps = segment_or_empty(generation.response);
        ctx.provenance.assign(ctx.steps.size(), StepOrigin::Generated);
    }

    RequestOutcome outcome;
    finalize(ctx, outcome, skip_flag);

    // Both misses and skip-reuse regenerations seed the cache with the final
    // answer so the new semantics are warm. JSON entries are only stored when
    // a valid payload step exists.
    bool storable = !ctx.steps.empty();
    for (const Step& s : ctx.steps) {
        if (s.text.empty()) storable = false;
    }
    if (ctx.task == TaskType::Json) {
        storable = ctx.steps.size() == 1 && ctx.steps.front().kind == StepKind::JsonPayload;
    }
    if (storable) {
        CacheEntry entry;
        entry.prompt = ctx.prompt;
        entry.embedding = ctx.query;
        entry.steps = ctx.steps;
        entry.task_type = ctx.task;
        entry.constraints = ctx.constraints;
        entry.created_at = iso_utc_now();
        entry.creating_call_id = generation.call_id;
        store_->insert(std::move(entry));
    }
    return outcome;
}

void Orchestrator::finalize(RequestContext& ctx, RequestOutcome& outcome, bool skip_flag) {
    std::string answer = ctx.steps.empty() ? "" : stitch(ctx.steps);
    CheckResult final_check = ctx.task_check(answer);

    if (!final_check.pass && !ctx.repair_used) {
        // At most one task-specific repair, then recheck.
        if (ctx.task == TaskType::Math && ctx.state) {
            const PatchPrompt repair = build_math_patch_prompt(
                ctx.prompt, *ctx.state, {},
                Step{1, answer.empty() ? "(none)" : answer, StepKind::Generic});
            ctx.repair_used = true;
            try {
                const BackendCall rc =
                    ctx.call(*gateway_, counters_.get(), repair.body, CallType::Repair);
                ctx.steps = segment_or_empty(rc.response);
                reindex(ctx.steps);
                ctx.provenance.assign(ctx.steps.size(), StepOrigin::Patched);
                answer = ctx.steps.empty() ? "" : stitch(ctx.steps);
                final_check = ctx.task_check(answer);
            } catch (const BackendUnavailableError&) {
                ctx.note_failed_call(repair.body, CallType::Repair);
            }
        } else if (ctx.task == TaskType::Json) {
            const PatchPrompt repair = build_json_repair_prompt(
                ctx.prompt, ctx.constraints.required_keys, answer, final_check.reason);
            ctx.repair_used = true;
            try {
                const BackendCall rc =
                    ctx.call(*gateway_, counters_.get(), repair.body, CallType::Repair);
                try {
                    ctx.steps = {extract_json_step(rc.response)};
                } catch (const NoJsonFoundError&) {
                    ctx.steps = {Step{1, rc.response, StepKind::Generic}};
                }
                ctx.provenance.assign(ctx.steps.size(), StepOrigin::Patched);
                answer = stitch(ctx.steps);
                final_check = ctx.task_check(answer);
            } catch (const BackendUnavailableError&) {
                // Return the last attempt with the failing check recorded.
                ctx.note_failed_call(repair.body, CallType::Repair);
            }
        }
    }

    // Deterministic fallback closes the correctness loop for math.
    if (!final_check.pass && ctx.task == TaskType::Math && ctx.state) {
        answer = deterministic_solve(*ctx.state);
        ctx.steps = {Step{1, answer, StepKind::Generic}};
        ctx.provenance = {StepOrigin::Fallback};
        final_check = final_math_check(answer, *ctx.state);
    }

    outcome.request_id = ctx.request_id;
    outcome.answer = std::move(answer);
    outcome.calls = ctx.calls;
    outcome.final_check = final_check;
    outcome.quality_check = ctx.task_check(outcome.answer);
    outcome.path = classify_outcome(outcome.calls, skip_flag);
    outcome.provenance = ctx.provenance;
    outcome.unverified_reuse = ctx.unverified_reuse;
    outcome.steps_reused = 0;
    outcome.steps_patched = 0;
    for (const StepOrigin origin : outcome.provenance) {
        if (origin == StepOrigin::Cached) ++outcome.steps_reused;
        if (origin == StepOrigin::Patched) ++outcome.steps_patched;
    }
    outcome.total_tokens = 0;
    double call_latency = 0.0;
    for (const BackendCall& c : outcome.calls) {
        outcome.total_tokens += c.total_tokens;
        call_latency += c.latency_seconds;
    }
    // Local processing time plus backend-reported latencies; the wall time
    // already spent inside backend calls is not double counted.
    outcome.latency_seconds =
        call_latency + std::max(0.0, seconds_since(ctx.start) - ctx.backend_wall);
}

}  // namespace stepcache

#include "stepcache/backend.hpp"

namespace stepcache {

std::string to_string(CallType t) {
    switch (t) {
        case CallType::BaselineGeneration: return "baseline_generation";
        case CallType::CacheHitReuse: return "cache_hit_reuse";
        case CallType::Verification: return "verification";
        case CallType::Patch: return "patch";
        case CallType::Repair: return "repair";
        case CallType::SkipReuseFallback: return "skip_reuse_fallback";
    }
    return "baseline_generation";
}

std::uint64_t estimate_tokens(const std::string& text) {
    return (text.size() + 3) / 4;
}

std::uint64_t CallLog::append(CallRecord record) {
    std::lock_guard lock(mutex_);
    record.call_id = next_call_id_++;
    records_.push_back(std::move(record));
    return records_.back().call_id;
}

std::vector<CallRecord> CallLog::snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

BackendGateway::BackendGateway(std::shared_ptr<LlmBackend> backend, std::shared_ptr<CallLog> log)
    : backend_(std::move(backend)), log_(std::move(log)) {}

BackendCall BackendGateway::generate(const std::string& prompt, CallType call_type,
                                     std::uint64_t request_id) {
    try {
        BackendCall call = backend_->generate(prompt, call_type);
        call.call_type = call_type;
        call.total_tokens = call.prompt_tokens + call.completion_tokens;
        CallRecord record;
        record.request_id = request_id;
        record.call_type = call_type;
        record.prompt = call.prompt;
        record.response = call.response;
        record.prompt_tokens = call.prompt_tokens;
        record.completion_tokens = call.completion_tokens;
        record.total_tokens = call.total_tokens;
        record.latency_seconds = call.latency_seconds;
        call.call_id = log_->append(std::move(record));
        return call;
    } catch (const std::exception& e) {
        CallRecord record;
        record.request_id = request_id;
        record.call_type = call_type;
        record.prompt = prompt;
        record.failed = true;
        record.error = e.what();
        log_->append(std::move(record));
        throw;
    }
}

}  // namespace stepcache

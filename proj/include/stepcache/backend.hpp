#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace stepcache {

enum class CallType {
    BaselineGeneration,
    CacheHitReuse,
    Verification,
    Patch,
    Repair,
    SkipReuseFallback,
};

std::string to_string(CallType t);

// One backend interaction with token and latency accounting.
// total_tokens == prompt_tokens + completion_tokens always holds.
struct BackendCall {
    std::uint64_t call_id = 0;
    CallType call_type = CallType::BaselineGeneration;
    std::string prompt;
    std::string response;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t total_tokens = 0;
    double latency_seconds = 0.0;
};

// Deterministic token estimator used when a backend reports no usage
// metadata: ceil(characters / 4).
std::uint64_t estimate_tokens(const std::string& text);

struct CallRecord {
    std::uint64_t call_id = 0;
    std::uint64_t request_id = 0;
    CallType call_type = CallType::BaselineGeneration;
    std::string prompt;
    std::string response;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t total_tokens = 0;
    double latency_seconds = 0.0;
    bool failed = false;
    std::string error;
};

// Append-only structured log of backend calls; appends are serialized.
class CallLog {
public:
    std::uint64_t append(CallRecord record);  // returns the assigned call id
    std::vector<CallRecord> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
    std::uint64_t next_call_id_ = 1;
};

// Minimal backend surface: one generate call. Implementations fill response,
// token usage and latency; call_id is assigned by the gateway.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual BackendCall generate(const std::string& prompt, CallType call_type) = 0;
};

// Routes generate calls to the backend and records every call (including
// failures) in the structured log, tagged with the originating request.
class BackendGateway {
public:
    BackendGateway(std::shared_ptr<LlmBackend> backend, std::shared_ptr<CallLog> log);

    // Throws whatever the backend throws (BackendUnavailableError,
    // BackendProtocolError) after logging the failed attempt.
    BackendCall generate(const std::string& prompt, CallType call_type,
                         std::uint64_t request_id);

    CallLog& log() { return *log_; }
    const CallLog& log() const { return *log_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    std::shared_ptr<CallLog> log_;
};

}  // namespace stepcache

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "stepcache/embedding.hpp"
#include "stepcache/json_verifier.hpp"
#include "stepcache/step.hpp"

namespace stepcache {

enum class TaskType {
    Math,
    Json,
    Other,
};

std::string to_string(TaskType t);
TaskType task_type_from_string(const std::string& name);

// Per-request constraints metadata. required_keys must be empty unless the
// task type is Json.
struct Constraints {
    TaskType task_type = TaskType::Other;
    JsonConstraint required_keys;
    bool force_skip_reuse = false;
};

struct EntryCounters {
    std::uint64_t hits = 0;
    std::uint64_t patches = 0;
    std::uint64_t skips = 0;
};

// One cached request: prompt, embedding, ordered steps, constraints,
// provenance and counters. Immutable once inserted except the counters.
struct CacheEntry {
    std::uint64_t id = 0;  // 0 = assign on insert
    std::string prompt;
    Embedding embedding;
    std::vector<Step> steps;
    TaskType task_type = TaskType::Other;
    Constraints constraints;
    std::vector<std::string> tool_outputs;
    std::string created_at;               // ISO 8601 UTC
    std::uint64_t creating_call_id = 0;   // backend call that produced the steps
    EntryCounters counters;
};

struct RetrievalHit {
    CacheEntry entry;
    double similarity = 0.0;
};

// Shared store of cached requests with exact nearest-neighbor retrieval over
// prompt embeddings. Reads run under a shared lock; inserts and counter
// updates take the exclusive lock.
class CacheStore {
public:
    explicit CacheStore(std::shared_ptr<const Embedder> embedder, double similarity_floor = 0.0);

    CacheStore(CacheStore&& other) noexcept;
    CacheStore& operator=(CacheStore&&) = delete;
    CacheStore(const CacheStore&) = delete;
    CacheStore& operator=(const CacheStore&) = delete;

    Embedding embed(const std::string& prompt) const;

    // Validates entry invariants, assigns an id when entry.id is 0. Throws
    // DuplicateIdError when the id is taken.
    std::uint64_t insert(CacheEntry entry);

    // Entry maximizing cosine similarity, ties broken by lowest id. Returns
    // nullopt when the store is empty or the best similarity is below the
    // configured floor.
    std::optional<RetrievalHit> retrieve_best(const Embedding& query) const;

    std::optional<CacheEntry> lookup(std::uint64_t id) const;
    std::size_t size() const;

    void record_hit(std::uint64_t id);
    void record_patch(std::uint64_t id);
    void record_skip(std::uint64_t id);

    // JSON Lines journal: a header record with format version and embedder
    // config, then one record per entry. restore() round-trips every field.
    void persist(const std::filesystem::path& path) const;
    static CacheStore restore(const std::filesystem::path& path);

    const Embedder& embedder() const { return *embedder_; }
    double similarity_floor() const { return similarity_floor_; }

private:
    std::shared_ptr<const Embedder> embedder_;
    double similarity_floor_;
    std::vector<CacheEntry> entries_;  // sorted by id ascending
    std::uint64_t next_id_ = 1;
    mutable std::shared_mutex mutex_;
};

// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string iso_utc_now();

}  // namespace stepcache

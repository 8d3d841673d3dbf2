#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace stepcache {

// Global counters for backend interactions and verifier activity.
// Rule-based verifications are counted here but consume no tokens.
struct Counters {
    std::atomic<std::uint64_t> baseline_generation{0};
    std::atomic<std::uint64_t> cache_hit_reuse{0};
    std::atomic<std::uint64_t> verification{0};
    std::atomic<std::uint64_t> patch_calls{0};
    std::atomic<std::uint64_t> repair_calls{0};
    std::atomic<std::uint64_t> skip_reuse_fallbacks{0};
};

struct CountersSnapshot {
    std::uint64_t baseline_generation = 0;
    std::uint64_t cache_hit_reuse = 0;
    std::uint64_t verification = 0;
    std::uint64_t patch_calls = 0;
    std::uint64_t repair_calls = 0;
    std::uint64_t skip_reuse_fallbacks = 0;
};

CountersSnapshot snapshot(const Counters& counters);

struct PerRequestRecord {
    std::uint64_t request_id = 0;
    std::string task;          // math | json | other
    std::string perturbation;  // benchmark cell label, may be empty
    std::string path;          // miss | reuse_only | patched | skip_reuse
    double latency_seconds = 0.0;
    std::uint64_t tokens = 0;
    bool quality_pass = false;
    bool final_pass = false;
};

struct Aggregates {
    double mean_latency = 0.0;
    double median_latency = 0.0;
    double p95_latency = 0.0;
    std::uint64_t total_tokens = 0;
    double tokens_per_request = 0.0;
    double quality_rate = 0.0;    // percent
    double final_rate = 0.0;      // percent
    double reuse_only_pct = 0.0;  // outcome split sums to 100
    double patch_pct = 0.0;
    double skip_pct = 0.0;
    double miss_pct = 0.0;
};

struct RunStats {
    std::vector<PerRequestRecord> per_request;
    Aggregates aggregates;
};

// Nearest-rank percentile: the ceil(p/100 * N)-th value of the sorted sample.
// Deterministic and sample-exact; median is the 50th percentile.
double nearest_rank_percentile(std::vector<double> values, double percentile);

// Recomputes aggregates from a record list. Throws NoDataError when empty.
Aggregates aggregate_records(const std::vector<PerRequestRecord>& records);

// Mean and population standard deviation, for "m ± s" presentation of
// per-seed results.
struct SeedSummary {
    double mean = 0.0;
    double stddev = 0.0;
};
SeedSummary summarize_seeds(const std::vector<double>& values);

// Collects per-request records; appends are serialized, aggregation runs on a
// snapshot.
class MetricsRegistry {
public:
    MetricsRegistry() : counters_(std::make_shared<Counters>()) {}

    void record(PerRequestRecord record);
    std::vector<PerRequestRecord> records() const;
    RunStats stats() const;  // throws NoDataError when nothing was recorded
    std::size_t size() const;

    Counters& counters() { return *counters_; }
    const Counters& counters() const { return *counters_; }
    std::shared_ptr<Counters> counters_ptr() { return counters_; }

private:
    mutable std::mutex mutex_;
    std::vector<PerRequestRecord> records_;
    std::shared_ptr<Counters> counters_;
};

}  // namespace stepcache

#include "stepcache/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "stepcache/errors.hpp"

namespace stepcache {

CountersSnapshot snapshot(const Counters& counters) {
    CountersSnapshot s;
    s.baseline_generation = counters.baseline_generation.load();
    s.cache_hit_reuse = counters.cache_hit_reuse.load();
    s.verification = counters.verification.load();
    s.patch_calls = counters.patch_calls.load();
    s.repair_calls = counters.repair_calls.load();
    s.skip_reuse_fallbacks = counters.skip_reuse_fallbacks.load();
    return s;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
    if (values.empty()) {
        throw NoDataError();
    }
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(percentile / 100.0 * static_cast<double>(values.size()));
    const std::size_t idx = std::max<std::size_t>(1, static_cast<std::size_t>(rank));
    return values[std::min(idx, values.size()) - 1];
}

Aggregates aggregate_records(const std::vector<PerRequestRecord>& records) {
    if (records.empty()) {
        throw NoDataError();
    }
    Aggregates a;
    std::vector<double> latencies;
    latencies.reserve(records.size());
    std::size_t quality = 0;
    std::size_t fin = 0;
    std::size_t reuse = 0;
    std::size_t patch = 0;
    std::size_t skip = 0;
    std::size_t miss = 0;
    double latency_sum = 0.0;
    for (const PerRequestRecord& r : records) {
        latencies.push_back(r.latency_seconds);
        latency_sum += r.latency_seconds;
        a.total_tokens += r.tokens;
        quality += r.quality_pass ? 1 : 0;
        fin += r.final_pass ? 1 : 0;
        if (r.path == "reuse_only") ++reuse;
        else if (r.path == "patched") ++patch;
        else if (r.path == "skip_reuse") ++skip;
        else ++miss;
    }
    const double n = static_cast<double>(records.size());
    a.mean_latency = latency_sum / n;
    a.median_latency = nearest_rank_percentile(latencies, 50.0);
    a.p95_latency = nearest_rank_percentile(latencies, 95.0);
    a.tokens_per_request = static_cast<double>(a.total_tokens) / n;
    a.quality_rate = 100.0 * static_cast<double>(quality) / n;
    a.final_rate = 100.0 * static_cast<double>(fin) / n;
    a.reuse_only_pct = 100.0 * static_cast<double>(reuse) / n;
    a.patch_pct = 100.0 * static_cast<double>(patch) / n;
    a.skip_pct = 100.0 * static_cast<double>(skip) / n;
    a.miss_pct = 100.0 * static_cast<double>(miss) / n;
    return a;
}

SeedSummary summarize_seeds(const std::vector<double>& values) {
    if (values.empty()) {
        throw NoDataError();
    }
    SeedSummary s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(values.size()));
    return s;
}

void MetricsRegistry::record(PerRequestRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<PerRequestRecord> MetricsRegistry::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

RunStats MetricsRegistry::stats() const {
    RunStats stats;
    stats.per_request = records();
    stats.aggregates = aggregate_records(stats.per_request);
    return stats;
}

std::size_t MetricsRegistry::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

}  // namespace stepcache

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepcache/backend.hpp"
#include "stepcache/cache_store.hpp"
#include "stepcache/metrics.hpp"
#include "stepcache/orchestrator.hpp"

namespace stepcache {

enum class PerturbKind {
    Low,
    Med,
    High,
    ValueChange,  // math only: alters the right-hand-side constant
    KeysChange,   // json only: appends one required key
};

std::string to_string(PerturbKind kind);

struct BenchCase {
    int base_id = 0;
    std::string prompt;
    TaskType task = TaskType::Math;
    PerturbKind kind = PerturbKind::Low;
    Constraints constraints;
};

struct WarmupPrompt {
    std::string prompt;
    TaskType task = TaskType::Math;
    Constraints constraints;
};

struct BenchSuite {
    int n_base = 0;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<WarmupPrompt> warmup;  // the n_base x 2 base prompts
    std::vector<BenchCase> cases;      // deduplicated evaluation requests
};

// Deterministic perturbation suite: n_base math and json base prompts plus k
// paraphrase variants per perturbation kind, exact-string deduplicated. A
// pure function of (n_base, k, seed); include_code is out of scope and must
// be false (UnsupportedError otherwise).
BenchSuite generate_suite(int n_base, int k, std::uint64_t seed, bool include_code = false);

enum class BenchMode {
    Baseline,
    StepCache,
};

// A request where the task-level quality check and the stitched-output final
// check disagreed, kept for debugging false positives/negatives.
struct MismatchRecord {
    std::uint64_t request_id = 0;
    std::string prompt;
    bool quality_check = false;
    bool final_check = false;
    std::string reason;
};

// One (task, perturbation) cell of the breakdown table. tokens_saved is the
// per-request mean baseline-minus-stepcache token difference, rounded to the
// nearest integer.
struct CellBreakdown {
    std::string task;
    std::string perturbation;
    double reuse_only_pct = 0.0;
    double patch_pct = 0.0;
    double skip_pct = 0.0;
    long tokens_saved = 0;
    double final_pct = 0.0;
};

struct ArmArtifacts {
    RunStats stats;
    std::vector<RequestOutcome> outcomes;     // aligned with suite.cases
    std::vector<MismatchRecord> mismatches;
    std::vector<CallRecord> call_log;
    CountersSnapshot counters;
};

// Runs one arm over the suite. The baseline arm routes every evaluation
// request straight to the backend; the stepcache arm seeds an empty cache in
// a warmup phase (excluded from the aggregates) and routes evaluation
// requests through the orchestrator. Backend failures are recorded per
// request and the run continues.
ArmArtifacts run_arm(const BenchSuite& suite, BenchMode mode,
                     const std::shared_ptr<LlmBackend>& backend);

struct BenchReport {
    nlohmann::json config;
    ArmArtifacts baseline;
    ArmArtifacts stepcache;
    std::vector<CellBreakdown> breakdown;
    std::vector<MismatchRecord> mismatches;  // both arms
};

// Runs both arms against fresh instances from the backend factory and builds
// the per-cell breakdown.
BenchReport run_benchmark(const BenchSuite& suite,
                          const std::function<std::shared_ptr<LlmBackend>()>& backend_factory,
                          nlohmann::json extra_config = {});

// Writes benchmark_results.json and benchmark_mismatches.json into out_dir.
// Throws IoError when the directory cannot be created or written.
void write_reports(const BenchReport& report, const std::filesystem::path& out_dir);

nlohmann::json aggregates_to_json(const Aggregates& a);
Aggregates aggregates_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const PerRequestRecord& r);
PerRequestRecord record_from_json(const nlohmann::json& j);

}  // namespace stepcache

// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepcache/bench.hpp"
#include "stepcache/cache_store.hpp"
#include "stepcache/errors.hpp"
#include "stepcache/math_verifier.hpp"
#include "stepcache/metrics.hpp"
#include "stepcache/orchestrator.hpp"
#include "stepcache/sim_backend.hpp"

using namespace stepcache;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Rng {
    std::uint64_t s;
    std::uint64_t next() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return s;
    }
    double unit() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

Embedding random_unit_vector(Rng& rng, std::size_t dim) {
    Embedding e;
    e.values.resize(dim);
    double norm = 0.0;
    for (double& v : e.values) {
        v = rng.unit() * 2.0 - 1.0;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : e.values) v /= norm;
    return e;
}

const CellBreakdown* find_cell(const BenchReport& report, const std::string& task,
                               const std::string& perturbation) {
    for (const CellBreakdown& c : report.breakdown) {
        if (c.task == task && c.perturbation == perturbation) return &c;
    }
    return nullptr;
}

// Independent consistency oracle via integer cross-multiplication:
// k*v_star + m == n with v_star = (c-b)/a  <=>  k*(c-b) + m*a == n*a.
bool oracle_consistent(std::int64_t k, std::int64_t m, std::int64_t n, std::int64_t a,
                       std::int64_t b, std::int64_t c) {
    return k * (c - b) + m * a == n * a;
}

std::string render_term(std::int64_t k, char var) {
    if (k == 1) return std::string(1, var);
    if (k == -1) return "-" + std::string(1, var);
    return std::to_string(k) + std::string(1, var);
}

// ---------------------------------------------------------------------------

struct Criterion1Artifacts {
    BenchSuite suite;
    BenchReport report;
    std::filesystem::path out_dir;
    bool ok = false;
};

Criterion1Artifacts criterion_1_outcome_split() {
    Criterion1Artifacts art;
    const auto t0 = std::chrono::steady_clock::now();
    art.suite = generate_suite(10, 3, 42);
    SimulatedBackendConfig sim;
    sim.seed = 42;
    sim.per_call_latency_seconds = 2.0;  // reported, not slept
    art.report = run_benchmark(art.suite, [sim] {
        return std::make_shared<SimulatedBackend>(sim);
    });
    art.out_dir = std::filesystem::temp_directory_path() / "stepcache_acceptance";
    std::filesystem::remove_all(art.out_dir);
    write_reports(art.report, art.out_dir);
    const double elapsed = seconds_since(t0);

    bool ok = true;
    std::string detail;
    const auto expect = [&](const char* task, const char* kind, double reuse, double patch,
                            double skip, bool exact) {
        const CellBreakdown* cell = find_cell(art.report, task, kind);
        if (!cell) {
            ok = false;
            detail += std::string(task) + "/" + kind + " missing; ";
            return;
        }
        const bool cell_ok =
            exact ? (cell->reuse_only_pct == reuse && cell->patch_pct == patch &&
                     cell->skip_pct == skip)
                  : (cell->reuse_only_pct >= reuse - 3.4 && cell->patch_pct == patch &&
                     std::abs(cell->reuse_only_pct + cell->skip_pct - 100.0) < 1e-9);
        if (!cell_ok) {
            ok = false;
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s/%s got %.1f/%.1f/%.1f; ", task, kind,
                          cell->reuse_only_pct, cell->patch_pct, cell->skip_pct);
            detail += buf;
        }
    };
    expect("json", "low", 100.0, 0.0, 0.0, true);
    expect("json", "med", 100.0, 0.0, 0.0, true);
    expect("json", "high", 100.0, 0.0, 0.0, true);
    expect("json", "keys_change", 0.0, 100.0, 0.0, true);
    expect("math", "value_change", 0.0, 0.0, 100.0, true);
    expect("math", "low", 96.7, 0.0, 3.3, false);
    expect("math", "med", 96.7, 0.0, 3.3, false);
    expect("math", "high", 96.7, 0.0, 3.3, false);
    if (elapsed >= 30.0) {
        ok = false;
        detail += "runtime " + std::to_string(elapsed) + "s; ";
    }
    char timing[64];
    std::snprintf(timing, sizeof(timing), "%zu eval requests in %.2fs",
                  art.suite.cases.size(), elapsed);
    report(1, "outcome-split reproduction (n=10, k=3, seed=42)", ok,
           ok ? std::string(timing) : detail);
    art.ok = ok;
    return art;
}

void criterion_2_math_guarantee() {
    const auto t0 = std::chrono::steady_clock::now();
    const BenchSuite suite = generate_suite(10, 3, 42);
    SimulatedBackendConfig sim;
    sim.seed = 42;
    sim.set_all_faults({/*wrong_constant=*/0.3, 0.0, 0.0});
    const ArmArtifacts arm = run_arm(suite, BenchMode::StepCache,
                                     std::make_shared<SimulatedBackend>(sim));
    const double elapsed = seconds_since(t0);

    std::size_t math_requests = 0;
    std::size_t passing = 0;
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < suite.cases.size(); ++i) {
        if (suite.cases[i].task != TaskType::Math) continue;
        ++math_requests;
        const RequestOutcome& o = arm.outcomes[i];
        const auto state = parse_math_prompt(suite.cases[i].prompt);
        if (state && final_math_check(o.answer, *state).pass) ++passing;
        for (const StepOrigin origin : o.provenance) {
            if (origin == StepOrigin::Fallback) {
                ++fallbacks;
                break;
            }
        }
    }
    const bool exercised = arm.counters.repair_calls > 0 && fallbacks > 0;
    const bool ok = math_requests > 0 && passing == math_requests && exercised &&
                    elapsed < 30.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%zu/%zu math answers pass, %llu repairs, %zu fallbacks, %.2fs", passing,
                  math_requests, static_cast<unsigned long long>(arm.counters.repair_calls),
                  fallbacks, elapsed);
    report(2, "math correctness guarantee under wrong_constant faults (rate 0.3)", ok, detail);
}

void criterion_3_json_enforcement() {
    const BenchSuite suite = generate_suite(10, 3, 42);
    SimulatedBackendConfig sim;
    sim.seed = 42;
    sim.patch.missing_key = 1.0;  // first patch response drops a key; repair is clean
    const ArmArtifacts arm = run_arm(suite, BenchMode::StepCache,
                                     std::make_shared<SimulatedBackend>(sim));

    std::size_t cases = 0;
    std::size_t good = 0;
    for (std::size_t i = 0; i < suite.cases.size(); ++i) {
        const BenchCase& c = suite.cases[i];
        if (c.task != TaskType::Json || c.kind != PerturbKind::KeysChange) continue;
        ++cases;
        const RequestOutcome& o = arm.outcomes[i];
        const bool pass = final_json_check(o.answer, c.constraints.required_keys).pass;
        if (pass && o.calls.size() <= 2) ++good;
    }
    const bool ok = cases > 0 && good == cases;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%zu/%zu keys_change cases PASS within 2 calls",
                  good, cases);
    report(3, "json enforcement with bounded repair (missing_key at 1.0 on patch)", ok, detail);
}

void criterion_4_fast_path_purity(const Criterion1Artifacts& art) {
    std::set<std::uint64_t> reuse_ids;
    std::size_t reuse_count = 0;
    bool ok = true;
    for (const RequestOutcome& o : art.report.stepcache.outcomes) {
        if (o.path != OutcomePath::ReuseOnly) continue;
        ++reuse_count;
        reuse_ids.insert(o.request_id);
        if (!o.calls.empty()) ok = false;
    }
    for (const CallRecord& r : art.report.stepcache.call_log) {
        if (reuse_ids.count(r.request_id) > 0) ok = false;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%zu reuse-only requests, zero backend records",
                  reuse_count);
    report(4, "fast-path purity (zero backend calls on reuse-only)", ok && reuse_count > 0,
           detail);
}

void criterion_5_accounting(const Criterion1Artifacts& art) {
    bool ok = true;
    std::string detail;

    // per-request tokens equal the sum over the recorded backend calls, both
    // in the outcome and in the structured log
    std::map<std::uint64_t, std::uint64_t> log_tokens;
    for (const CallRecord& r : art.report.stepcache.call_log) {
        log_tokens[r.request_id] += r.total_tokens;
    }
    for (const RequestOutcome& o : art.report.stepcache.outcomes) {
        std::uint64_t sum = 0;
        for (const BackendCall& c : o.calls) {
            if (c.total_tokens != c.prompt_tokens + c.completion_tokens) ok = false;
            sum += c.total_tokens;
        }
        if (o.total_tokens != sum) ok = false;
        const auto it = log_tokens.find(o.request_id);
        const std::uint64_t logged = it == log_tokens.end() ? 0 : it->second;
        if (o.total_tokens != logged) ok = false;
    }
    if (!ok) detail += "token identity violated; ";

    for (const ArmArtifacts* arm : {&art.report.baseline, &art.report.stepcache}) {
        const Aggregates& a = arm->stats.aggregates;
        if (std::abs(a.reuse_only_pct + a.patch_pct + a.skip_pct + a.miss_pct - 100.0) > 1e-9) {
            ok = false;
            detail += "outcome split does not sum to 100; ";
        }
        double min_latency = 1e300;
        for (const PerRequestRecord& r : arm->stats.per_request) {
            min_latency = std::min(min_latency, r.latency_seconds);
        }
        if (!(a.p95_latency >= a.median_latency && a.median_latency >= min_latency)) {
            ok = false;
            detail += "p95 >= median >= min violated; ";
        }
    }

    // reload the report and recompute the aggregates from the per-request
    // records; they must match exactly
    std::ifstream in(art.out_dir / "benchmark_results.json");
    json loaded;
    in >> loaded;
    for (const std::string arm : {"baseline", "stepcache"}) {
        std::vector<PerRequestRecord> records;
        for (const json& j : loaded.at("arms").at(arm).at("per_request")) {
            records.push_back(record_from_json(j));
        }
        const Aggregates recomputed = aggregate_records(records);
        const Aggregates stored = aggregates_from_json(loaded.at("arms").at(arm).at("aggregates"));
        if (recomputed.mean_latency != stored.mean_latency ||
            recomputed.median_latency != stored.median_latency ||
            recomputed.p95_latency != stored.p95_latency ||
            recomputed.total_tokens != stored.total_tokens ||
            recomputed.tokens_per_request != stored.tokens_per_request ||
            recomputed.quality_rate != stored.quality_rate ||
            recomputed.final_rate != stored.final_rate ||
            recomputed.reuse_only_pct != stored.reuse_only_pct ||
            recomputed.patch_pct != stored.patch_pct ||
            recomputed.skip_pct != stored.skip_pct ||
            recomputed.miss_pct != stored.miss_pct) {
            ok = false;
            detail += arm + " aggregates do not reproduce from records; ";
        }
    }
    report(5, "accounting identities and report reproducibility", ok, detail);
}

void criterion_6_retrieval_oracle() {
    Rng rng{0xfeedbeef};
    const std::size_t dim = 64;
    auto embedder = std::make_shared<TrigramEmbedder>(dim);
    CacheStore store(embedder);
    std::vector<Embedding> vectors;
    vectors.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
        CacheEntry e;
        e.id = static_cast<std::uint64_t>(i + 1);
        e.prompt = "entry " + std::to_string(i);
        e.embedding = random_unit_vector(rng, dim);
        e.steps = {Step{1, "body", StepKind::Generic}};
        vectors.push_back(e.embedding);
        store.insert(std::move(e));
    }

    bool ok = true;
    for (int q = 0; q < 100; ++q) {
        const Embedding query = random_unit_vector(rng, dim);
        std::uint64_t best_id = 0;
        double best = -2.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            const double sim = cosine_similarity(query, vectors[i]);
            if (sim > best) {
                best = sim;
                best_id = i + 1;
            }
        }
        const auto hit = store.retrieve_best(query);
        if (!hit || hit->entry.id != best_id || hit->similarity != best) ok = false;
    }

    // explicit tie: identical embeddings must resolve to the lowest id
    CacheStore tie_store(embedder);
    const Embedding shared = random_unit_vector(rng, dim);
    for (std::uint64_t id : {9ull, 4ull, 7ull}) {
        CacheEntry e;
        e.id = id;
        e.prompt = "tie";
        e.embedding = shared;
        e.steps = {Step{1, "body", StepKind::Generic}};
        tie_store.insert(std::move(e));
    }
    const auto tie_hit = tie_store.retrieve_best(shared);
    if (!tie_hit || tie_hit->entry.id != 4) ok = false;

    report(6, "retrieval equals the exhaustive cosine oracle (1000 entries, 100 queries)", ok);
}

void criterion_7_verifier_sweep() {
    std::size_t states = 0;
    std::size_t solve_failures = 0;
    std::size_t false_pass = 0;
    std::size_t false_fail = 0;
    std::size_t mutations = 0;

    for (std::int64_t a = -9; a <= 9; ++a) {
        if (a == 0) continue;
        for (std::int64_t b = -20; b <= 20; ++b) {
            for (std::int64_t c = -20; c <= 20; ++c) {
                ++states;
                const MathState st =
                    make_math_state(Rational(a), Rational(b), Rational(c), 'x');
                if (!final_math_check(deterministic_solve(st), st).pass) ++solve_failures;

                const std::int64_t inter = c - b;
                const std::vector<Step> steps = {
                    Step{1, render_term(a, 'x') + " = " + std::to_string(inter),
                         StepKind::Generic},
                    Step{2, "x = " + st.v_star.to_string(), StepKind::Generic},
                };
                if (verify_steps(steps, st).first_inconsistent) ++false_fail;

                // single-constant mutations; "caught" is judged against the
                // independent cross-multiplication oracle
                for (const std::int64_t delta : {-1, 1}) {
                    // intermediate constant
                    {
                        std::vector<Step> m = steps;
                        m[0].text =
                            render_term(a, 'x') + " = " + std::to_string(inter + delta);
                        ++mutations;
                        const bool inconsistent =
                            !oracle_consistent(a, 0, inter + delta, a, b, c);
                        const auto v = verify_steps(m, st);
                        if (inconsistent && (!v.first_inconsistent || *v.first_inconsistent > 1))
                            ++false_pass;
                        if (!inconsistent && v.first_inconsistent) ++false_fail;
                    }
                    // coefficient
                    {
                        std::vector<Step> m = steps;
                        m[0].text =
                            render_term(a + delta, 'x') + " = " + std::to_string(inter);
                        ++mutations;
                        const bool inconsistent =
                            !oracle_consistent(a + delta, 0, inter, a, b, c);
                        const auto v = verify_steps(m, st);
                        if (inconsistent && (!v.first_inconsistent || *v.first_inconsistent > 1))
                            ++false_pass;
                        if (!inconsistent && v.first_inconsistent) ++false_fail;
                    }
                    // final assignment: v_star is (c-b)/a; shifting it by a
                    // whole unit always breaks the assignment
                    {
                        std::vector<Step> m = steps;
                        m[1].text = "x = " + (st.v_star + Rational(delta)).to_string();
                        ++mutations;
                        const auto v = verify_steps(m, st);
                        if (!v.first_inconsistent || *v.first_inconsistent > 2) ++false_pass;
                    }
                }
            }
        }
    }

    const bool ok = solve_failures == 0 && false_pass == 0 && false_fail == 0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%zu states, %zu mutations, %zu solve failures, %zu false PASS, %zu false FAIL",
                  states, mutations, solve_failures, false_pass, false_fail);
    report(7, "verifier oracle sweep over a in [-9,9], b,c in [-20,20]", ok, detail);
}

void criterion_8_persistence() {
    const auto path =
        std::filesystem::temp_directory_path() / "stepcache_acceptance_store.jsonl";
    auto embedder = std::make_shared<TrigramEmbedder>();
    CacheStore store(embedder);
    Rng rng{20250101};

    // 60 mixed entries: math, json and other
    std::vector<std::string> prompts;
    for (int i = 0; i < 20; ++i) {
        const std::int64_t a = rng.range(1, 9);
        const std::int64_t b = rng.range(0, 20);
        const std::int64_t s = rng.range(2, 12);
        const std::string var(1, "xyzt"[i % 4]);
        const std::string prompt = "Solve " + std::to_string(a) + var + " + " +
                                   std::to_string(b) + " = " + std::to_string(a * s + b) +
                                   " for " + var;
        CacheEntry e;
        e.prompt = prompt;
        e.embedding = embedder->embed(prompt);
        e.steps = {Step{1, std::to_string(a) + var + " = " + std::to_string(a * s),
                        StepKind::Generic},
                   Step{2, var + " = " + std::to_string(s), StepKind::Generic}};
        e.task_type = TaskType::Math;
        e.constraints.task_type = TaskType::Math;
        e.created_at = iso_utc_now();
        e.counters.hits = static_cast<std::uint64_t>(rng.range(0, 9));
        store.insert(std::move(e));
        prompts.push_back(prompt);
    }
    for (int i = 0; i < 20; ++i) {
        const std::string keys = "k" + std::to_string(i) + ", v" + std::to_string(i);
        const std::string prompt = "Return a JSON object with keys " + keys;
        CacheEntry e;
        e.prompt = prompt;
        e.embedding = embedder->embed(prompt);
        e.steps = {Step{1,
                        R"({"k)" + std::to_string(i) + R"(":1,"v)" + std::to_string(i) +
                            R"(":2})",
                        StepKind::JsonPayload}};
        e.task_type = TaskType::Json;
        e.constraints.task_type = TaskType::Json;
        e.constraints.required_keys.required_keys = {"k" + std::to_string(i),
                                                     "v" + std::to_string(i)};
        e.created_at = iso_utc_now();
        store.insert(std::move(e));
        prompts.push_back(prompt);
    }
    for (int i = 0; i < 20; ++i) {
        const std::string prompt = "tell me about topic number " + std::to_string(i * 37);
        CacheEntry e;
        e.prompt = prompt;
        e.embedding = embedder->embed(prompt);
        e.steps = {Step{1, "some prose " + std::to_string(i), StepKind::Generic}};
        e.tool_outputs = {"blob " + std::to_string(i)};
        e.created_at = iso_utc_now();
        store.insert(std::move(e));
        prompts.push_back(prompt);
    }

    bool ok = store.size() >= 50;
    store.persist(path);
    const CacheStore restored = CacheStore::restore(path);
    if (restored.size() != store.size()) ok = false;

    for (int q = 0; q < 20; ++q) {
        const std::string probe =
            prompts[static_cast<std::size_t>(rng.range(0, 59))] + " probe " +
            std::to_string(q);
        const Embedding query = embedder->embed(probe);
        const auto before = store.retrieve_best(query);
        const auto after = restored.retrieve_best(query);
        if (!before || !after || before->entry.id != after->entry.id ||
            before->similarity != after->similarity) {
            ok = false;
        }
    }

    bool corrupt_detected = false;
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 25);
    try {
        CacheStore::restore(path);
    } catch (const CorruptStoreError&) {
        corrupt_detected = true;
    }
    std::filesystem::remove(path);
    report(8, "persistence round trip of 60 mixed entries plus truncation detection",
           ok && corrupt_detected);
}

void criterion_9_latency_direction(const Criterion1Artifacts& art) {
    const double base = art.report.baseline.stats.aggregates.mean_latency;
    const double sc = art.report.stepcache.stats.aggregates.mean_latency;
    const bool ok = base > 0.0 && sc < 0.35 * base;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "stepcache mean %.3fs vs baseline mean %.3fs (%.2fx)",
                  sc, base, base > 0 ? sc / base : 0.0);
    report(9, "directional latency: stepcache mean < 0.35 x baseline mean", ok, detail);
}

}  // namespace

int main() {
    std::printf("stepcache acceptance suite\n");
    const Criterion1Artifacts art = criterion_1_outcome_split();
    criterion_2_math_guarantee();
    criterion_3_json_enforcement();
    criterion_4_fast_path_purity(art);
    criterion_5_accounting(art);
    criterion_6_retrieval_oracle();
    criterion_7_verifier_sweep();
    criterion_8_persistence();
    criterion_9_latency_direction(art);
    std::filesystem::remove_all(art.out_dir);

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}

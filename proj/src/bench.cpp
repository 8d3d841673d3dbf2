#include "stepcache/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "stepcache/errors.hpp"
#include "stepcache/json_verifier.hpp"
#include "stepcache/math_verifier.hpp"
#include "stepcache/sim_backend.hpp"

namespace stepcache {

namespace {

using nlohmann::json;

// Portable seeded generator (splitmix64): identical sequences on every
// platform, which std::uniform_int_distribution does not guarantee.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform-ish integer in [lo, hi]; the modulo bias is irrelevant here.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() %
                                              static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t state_;
};

struct MathBase {
    std::int64_t a = 1;
    std::int64_t b = 0;
    std::int64_t c = 0;
    char var = 'x';

    std::string equation() const {
        return std::to_string(a) + std::string(1, var) + " + " + std::to_string(b) + " = " +
               std::to_string(c);
    }
    std::string prompt() const {
        return "Solve " + equation() + " for " + std::string(1, var);
    }
};

struct JsonBase {
    std::vector<std::string> keys;

    std::string key_list() const {
        std::string out;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (i > 0) out += ", ";
            out += keys[i];
        }
        return out;
    }
    std::string prompt() const { return "Return a JSON object with keys " + key_list(); }
};

const std::vector<std::string>& math_templates(PerturbKind kind) {
    static const std::vector<std::string> low = {
        "Please solve {EQ} for {V}.",
        "Solve {EQ} for {V}, thanks!",
        "Could you solve {EQ} for {V}?",
        "Kindly solve {EQ} for {V}.",
        "Solve {EQ} for {V} please.",
    };
    static const std::vector<std::string> med = {
        "Solve for {V}: {EQ}",
        "Given {EQ}, find {V}.",
        "Find {V} given {EQ}.",
        "For the equation {EQ}, solve for {V}.",
        "Determine {V} from {EQ}.",
    };
    static const std::vector<std::string> high = {
        "What value of {V} makes {EQ} true?",
        "Work out the value of {V} satisfying {EQ}.",
        "I have the linear equation {EQ} and need the value of {V}.",
        "Compute the unknown {V} in the equation {EQ}.",
        "Figure out {V} so that {EQ} holds.",
    };
    switch (kind) {
        case PerturbKind::Low: return low;
        case PerturbKind::Med: return med;
        default: return high;
    }
}

const std::vector<std::string>& json_templates(PerturbKind kind) {
    static const std::vector<std::string> low = {
        "Please return a JSON object with keys {KEYS}.",
        "Return a JSON object with keys {KEYS}, thanks!",
        "Could you return a JSON object with keys {KEYS}?",
        "Kindly return a JSON object with keys {KEYS}.",
        "Return a JSON object with keys {KEYS} please.",
    };
    static const std::vector<std::string> med = {
        "Produce a JSON object containing the keys {KEYS}.",
        "Give me a JSON object that has the keys {KEYS}.",
        "Generate a JSON object with the keys {KEYS}.",
        "Build a JSON object holding the keys {KEYS}.",
        "Emit a JSON object including the keys {KEYS}.",
    };
    static const std::vector<std::string> high = {
        "I need structured output: one JSON object whose top-level keys are {KEYS}.",
        "Respond with nothing but a JSON object carrying the keys {KEYS}.",
        "Send back a machine-readable JSON object with exactly the keys {KEYS}.",
        "Output a single JSON object where the keys are {KEYS}.",
        "Craft one JSON object exposing the keys {KEYS}.",
    };
    switch (kind) {
        case PerturbKind::Low: return low;
        case PerturbKind::Med: return med;
        default: return high;
    }
}

std::string fill(std::string tmpl, const std::string& field, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = tmpl.find(field, pos)) != std::string::npos) {
        tmpl.replace(pos, field.size(), value);
        pos += value.size();
    }
    return tmpl;
}

// k distinct template indices, seeded; wraps around when k exceeds the pool.
std::vector<std::size_t> pick_templates(SeededRng& rng, std::size_t pool_size, int k) {
    std::vector<std::size_t> order(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) order[i] = i;
    for (std::size_t i = pool_size; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.range(
                      0, static_cast<std::int64_t>(i) - 1))]);
    }
    std::vector<std::size_t> picks;
    for (int j = 0; j < k; ++j) picks.push_back(order[j % pool_size]);
    return picks;
}

CheckResult task_quality_check(const BenchCase& c, const std::string& answer) {
    if (c.task == TaskType::Math) {
        const auto state = parse_math_prompt(c.prompt);
        return state ? final_math_check(answer, *state) : CheckResult::ok();
    }
    if (c.task == TaskType::Json) {
        return final_json_check(answer, c.constraints.required_keys);
    }
    return CheckResult::ok();
}

}  // namespace

std::string to_string(PerturbKind kind) {
    switch (kind) {
        case PerturbKind::Low: return "low";
        case PerturbKind::Med: return "med";
        case PerturbKind::High: return "high";
        case PerturbKind::ValueChange: return "value_change";
        case PerturbKind::KeysChange: return "keys_change";
    }
    return "low";
}

BenchSuite generate_suite(int n_base, int k, std::uint64_t seed, bool include_code) {
    if (include_code) {
        throw UnsupportedError("code tasks are not supported (--include-code must be 0)");
    }
    if (n_base < 1 || k < 1) {
        throw std::invalid_argument("n_base and k must be >= 1");
    }

    BenchSuite suite;
    suite.n_base = n_base;
    suite.k = k;
    suite.seed = seed;

    SeededRng rng(seed);
    const std::string var_pool = "xyztuwnmpq";
    const std::vector<std::string> key_pool = {"a", "b", "c", "d", "e",
                                               "f", "g", "h", "i", "j"};

    // Base prompts; resample until distinct so every base has its own cache
    // entry after warmup.
    std::vector<MathBase> math_bases;
    std::set<std::string> seen_math;
    while (static_cast<int>(math_bases.size()) < n_base) {
        MathBase base;
        base.a = rng.range(1, 9);
        base.b = rng.range(0, 20);
        const std::int64_t solution = rng.range(2, 12);
        base.c = base.a * solution + base.b;
        base.var = var_pool[static_cast<std::size_t>(
            rng.range(0, static_cast<std::int64_t>(var_pool.size()) - 1))];
        if (seen_math.insert(base.prompt()).second) {
            math_bases.push_back(base);
        }
    }

    std::vector<JsonBase> json_bases;
    std::set<std::string> seen_json;
    while (static_cast<int>(json_bases.size()) < n_base) {
        JsonBase base;
        std::set<std::size_t> picked;
        while (picked.size() < 3) {
            picked.insert(static_cast<std::size_t>(
                rng.range(0, static_cast<std::int64_t>(key_pool.size()) - 1)));
        }
        for (std::size_t idx : picked) base.keys.push_back(key_pool[idx]);
        if (seen_json.insert(base.prompt()).second) {
            json_bases.push_back(base);
        }
    }

    for (const MathBase& base : math_bases) {
        Constraints constraints;
        constraints.task_type = TaskType::Math;
        suite.warmup.push_back({base.prompt(), TaskType::Math, constraints});
    }
    for (const JsonBase& base : json_bases) {
        Constraints constraints;
        constraints.task_type = TaskType::Json;
        constraints.required_keys.required_keys = base.keys;
        suite.warmup.push_back({base.prompt(), TaskType::Json, constraints});
    }

    std::vector<BenchCase> cases;

    const PerturbKind paraphrase_kinds[] = {PerturbKind::Low, PerturbKind::Med,
                                            PerturbKind::High};
    for (int b = 0; b < n_base; ++b) {
        const MathBase& base = math_bases[static_cast<std::size_t>(b)];
        Constraints constraints;
        constraints.task_type = TaskType::Math;
        for (const PerturbKind kind : paraphrase_kinds) {
            const auto& pool = math_templates(kind);
            for (std::size_t t : pick_templates(rng, pool.size(), k)) {
                std::string prompt = fill(pool[t], "{EQ}", base.equation());
                prompt = fill(prompt, "{V}", std::string(1, base.var));
                cases.push_back({b, std::move(prompt), TaskType::Math, kind, constraints});
            }
        }
        // value_change: same shape, new right-hand side (still an integer
        // solution), reuse conservatively bypassed by construction.
        std::set<std::int64_t> used_solutions{(base.c - base.b) / base.a};
        Constraints forced = constraints;
        forced.force_skip_reuse = true;
        for (int j = 0; j < k; ++j) {
            std::int64_t solution = 0;
            do {
                solution = rng.range(2, 24);
            } while (used_solutions.count(solution) > 0);
            used_solutions.insert(solution);
            MathBase changed = base;
            changed.c = base.a * solution + base.b;
            cases.push_back(
                {b, changed.prompt(), TaskType::Math, PerturbKind::ValueChange, forced});
        }
    }

    for (int b = 0; b < n_base; ++b) {
        const JsonBase& base = json_bases[static_cast<std::size_t>(b)];
        Constraints constraints;
        constraints.task_type = TaskType::Json;
        constraints.required_keys.required_keys = base.keys;
        for (const PerturbKind kind : paraphrase_kinds) {
            const auto& pool = json_templates(kind);
            for (std::size_t t : pick_templates(rng, pool.size(), k)) {
                cases.push_back({b, fill(pool[t], "{KEYS}", base.key_list()), TaskType::Json,
                                 kind, constraints});
            }
        }
        // keys_change: one extra required key per variant.
        std::vector<std::string> candidates;
        for (const std::string& key : key_pool) {
            if (std::find(base.keys.begin(), base.keys.end(), key) == base.keys.end()) {
                candidates.push_back(key);
            }
        }
        std::set<std::string> used;
        for (int j = 0; j < k; ++j) {
            std::string added;
            do {
                added = candidates[static_cast<std::size_t>(
                    rng.range(0, static_cast<std::int64_t>(candidates.size()) - 1))];
            } while (used.count(added) > 0 && used.size() < candidates.size());
            used.insert(added);
            JsonBase changed = base;
            changed.keys.push_back(added);
            Constraints with_key = constraints;
            with_key.required_keys.required_keys = changed.keys;
            cases.push_back(
                {b, changed.prompt(), TaskType::Json, PerturbKind::KeysChange, with_key});
        }
    }

    // Exact-string dedup, first occurrence wins.
    std::unordered_set<std::string> seen_prompts;
    for (BenchCase& c : cases) {
        if (seen_prompts.insert(c.prompt).second) {
            suite.cases.push_back(std::move(c));
        }
    }
    return suite;
}

ArmArtifacts run_arm(const BenchSuite& suite, BenchMode mode,
                     const std::shared_ptr<LlmBackend>& backend) {
    ArmArtifacts arm;
    auto log = std::make_shared<CallLog>();
    auto gateway = std::make_shared<BackendGateway>(backend, log);
    MetricsRegistry registry;

    if (mode == BenchMode::StepCache) {
        auto store = std::make_shared<CacheStore>(std::make_shared<TrigramEmbedder>());
        Orchestrator orchestrator(store, gateway, registry.counters_ptr());

        // Warmup phase forces generation to seed the cache from the base
        // prompts; excluded from evaluation aggregates.
        for (const WarmupPrompt& w : suite.warmup) {
            orchestrator.handle_miss(w.prompt, w.task, w.constraints);
        }

        for (const BenchCase& c : suite.cases) {
            RequestOutcome outcome;
            try {
                outcome = orchestrator.handle(c.prompt, c.task, c.constraints);
            } catch (const Error& e) {
                outcome.request_id = 0;
                outcome.answer = "";
                outcome.final_check = CheckResult::fail(std::string("backend_error: ") + e.what());
                outcome.quality_check = outcome.final_check;
                outcome.path = OutcomePath::Miss;
            }
            PerRequestRecord record;
            record.request_id = outcome.request_id;
            record.task = to_string(c.task);
            record.perturbation = to_string(c.kind);
            record.path = to_string(outcome.path);
            record.latency_seconds = outcome.latency_seconds;
            record.tokens = outcome.total_tokens;
            record.quality_pass = outcome.quality_check.pass;
            record.final_pass = outcome.final_check.pass;
            registry.record(record);
            if (outcome.quality_check.pass != outcome.final_check.pass) {
                arm.mismatches.push_back(
                    {outcome.request_id, c.prompt, outcome.quality_check.pass,
                     outcome.final_check.pass,
                     outcome.final_check.pass ? outcome.quality_check.reason
                                              : outcome.final_check.reason});
            }
            arm.outcomes.push_back(std::move(outcome));
        }
    } else {
        std::uint64_t request_id = 0;
        for (const BenchCase& c : suite.cases) {
            ++request_id;
            RequestOutcome outcome;
            outcome.request_id = request_id;
            outcome.path = OutcomePath::Miss;
            const auto start = std::chrono::steady_clock::now();
            try {
                BackendCall call = gateway->generate(c.prompt, CallType::BaselineGeneration,
                                                     request_id);
                ++registry.counters().baseline_generation;
                outcome.answer = call.response;
                outcome.total_tokens = call.total_tokens;
                outcome.latency_seconds =
                    call.latency_seconds +
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
                outcome.calls.push_back(std::move(call));
                const CheckResult quality = task_quality_check(c, outcome.answer);
                outcome.quality_check = quality;
                outcome.final_check = quality;
            } catch (const Error& e) {
                outcome.final_check = CheckResult::fail(std::string("backend_error: ") + e.what());
                outcome.quality_check = outcome.final_check;
            }
            PerRequestRecord record;
            record.request_id = request_id;
            record.task = to_string(c.task);
            record.perturbation = to_string(c.kind);
            record.path = to_string(outcome.path);
            record.latency_seconds = outcome.latency_seconds;
            record.tokens = outcome.total_tokens;
            record.quality_pass = outcome.quality_check.pass;
            record.final_pass = outcome.final_check.pass;
            registry.record(record);
            if (outcome.quality_check.pass != outcome.final_check.pass) {
                arm.mismatches.push_back({request_id, c.prompt, outcome.quality_check.pass,
                                          outcome.final_check.pass,
                                          outcome.final_check.reason});
            }
            arm.outcomes.push_back(std::move(outcome));
        }
    }

    arm.stats = registry.stats();
    arm.call_log = log->snapshot();
    arm.counters = snapshot(registry.counters());
    return arm;
}

BenchReport run_benchmark(const BenchSuite& suite,
                          const std::function<std::shared_ptr<LlmBackend>()>& backend_factory,
                          nlohmann::json extra_config) {
    BenchReport report;
    report.baseline = run_arm(suite, BenchMode::Baseline, backend_factory());
    report.stepcache = run_arm(suite, BenchMode::StepCache, backend_factory());

    report.config = {{"n", suite.n_base},
                     {"k", suite.k},
                     {"seed", suite.seed},
                     {"include_code", false},
                     {"warmup_requests", suite.warmup.size()},
                     {"evaluation_requests", suite.cases.size()}};
    for (auto& [key, value] : extra_config.items()) {
        report.config[key] = value;
    }

    // Per-cell outcome split and token savings (baseline minus stepcache).
    const std::pair<TaskType, const char*> tasks[] = {{TaskType::Math, "math"},
                                                      {TaskType::Json, "json"}};
    const PerturbKind kinds[] = {PerturbKind::Low, PerturbKind::Med, PerturbKind::High,
                                 PerturbKind::ValueChange, PerturbKind::KeysChange};
    for (const auto& [task, task_name] : tasks) {
        for (const PerturbKind kind : kinds) {
            std::size_t count = 0;
            std::size_t reuse = 0;
            std::size_t patch = 0;
            std::size_t skip = 0;
            std::size_t final_pass = 0;
            double baseline_tokens = 0.0;
            double stepcache_tokens = 0.0;
            for (std::size_t i = 0; i < suite.cases.size(); ++i) {
                const BenchCase& c = suite.cases[i];
                if (c.task != task || c.kind != kind) continue;
                ++count;
                const RequestOutcome& sc = report.stepcache.outcomes[i];
                switch (sc.path) {
                    case OutcomePath::ReuseOnly: ++reuse; break;
                    case OutcomePath::Patched: ++patch; break;
                    case OutcomePath::SkipReuse: ++skip; break;
                    case OutcomePath::Miss: break;
                }
                final_pass += sc.final_check.pass ? 1 : 0;
                baseline_tokens += static_cast<double>(report.baseline.outcomes[i].total_tokens);
                stepcache_tokens += static_cast<double>(sc.total_tokens);
            }
            if (count == 0) continue;
            CellBreakdown cell;
            cell.task = task_name;
            cell.perturbation = to_string(kind);
            const double n = static_cast<double>(count);
            cell.reuse_only_pct = 100.0 * static_cast<double>(reuse) / n;
            cell.patch_pct = 100.0 * static_cast<double>(patch) / n;
            cell.skip_pct = 100.0 * static_cast<double>(skip) / n;
            cell.final_pct = 100.0 * static_cast<double>(final_pass) / n;
            cell.tokens_saved = std::lround((baseline_tokens - stepcache_tokens) / n);
            report.breakdown.push_back(std::move(cell));
        }
    }

    report.mismatches = report.baseline.mismatches;
    report.mismatches.insert(report.mismatches.end(), report.stepcache.mismatches.begin(),
                             report.stepcache.mismatches.end());
    return report;
}

json aggregates_to_json(const Aggregates& a) {
    return {{"mean_latency", a.mean_latency},
            {"median_latency", a.median_latency},
            {"p95_latency", a.p95_latency},
            {"total_tokens", a.total_tokens},
            {"tokens_per_request", a.tokens_per_request},
            {"quality_rate", a.quality_rate},
            {"final_rate", a.final_rate},
            {"reuse_only_pct", a.reuse_only_pct},
            {"patch_pct", a.patch_pct},
            {"skip_pct", a.skip_pct},
            {"miss_pct", a.miss_pct}};
}

Aggregates aggregates_from_json(const json& j) {
    Aggregates a;
    a.mean_latency = j.at("mean_latency").get<double>();
    a.median_latency = j.at("median_latency").get<double>();
    a.p95_latency = j.at("p95_latency").get<double>();
    a.total_tokens = j.at("total_tokens").get<std::uint64_t>();
    a.tokens_per_request = j.at("tokens_per_request").get<double>();
    a.quality_rate = j.at("quality_rate").get<double>();
    a.final_rate = j.at("final_rate").get<double>();
    a.reuse_only_pct = j.at("reuse_only_pct").get<double>();
    a.patch_pct = j.at("patch_pct").get<double>();
    a.skip_pct = j.at("skip_pct").get<double>();
    a.miss_pct = j.at("miss_pct").get<double>();
    return a;
}

json record_to_json(const PerRequestRecord& r) {
    return {{"request_id", r.request_id},
            {"task", r.task},
            {"perturbation", r.perturbation},
            {"path", r.path},
            {"latency_seconds", r.latency_seconds},
            {"tokens", r.tokens},
            {"quality_pass", r.quality_pass},
            {"final_pass", r.final_pass}};
}

PerRequestRecord record_from_json(const json& j) {
    PerRequestRecord r;
    r.request_id = j.at("request_id").get<std::uint64_t>();
    r.task = j.at("task").get<std::string>();
    r.perturbation = j.at("perturbation").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.latency_seconds = j.at("latency_seconds").get<double>();
    r.tokens = j.at("tokens").get<std::uint64_t>();
    r.quality_pass = j.at("quality_pass").get<bool>();
    r.final_pass = j.at("final_pass").get<bool>();
    return r;
}

void write_reports(const BenchReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir.string() + ": " +
                      ec.message());
    }

    const auto arm_to_json = [](const ArmArtifacts& arm) {
        json records = json::array();
        for (const PerRequestRecord& r : arm.stats.per_request) {
            records.push_back(record_to_json(r));
        }
        return json{{"aggregates", aggregates_to_json(arm.stats.aggregates)},
                    {"per_request", std::move(records)},
                    {"counters",
                     {{"baseline_generation", arm.counters.baseline_generation},
                      {"cache_hit_reuse", arm.counters.cache_hit_reuse},
                      {"verification", arm.counters.verification},
                      {"patch_calls", arm.counters.patch_calls},
                      {"repair_calls", arm.counters.repair_calls},
                      {"skip_reuse_fallbacks", arm.counters.skip_reuse_fallbacks}}}};
    };

    json breakdown = json::array();
    for (const CellBreakdown& cell : report.breakdown) {
        breakdown.push_back({{"task", cell.task},
                             {"perturbation", cell.perturbation},
                             {"reuse_only_pct", cell.reuse_only_pct},
                             {"patch_pct", cell.patch_pct},
                             {"skip_pct", cell.skip_pct},
                             {"tokens_saved", cell.tokens_saved},
                             {"final_pct", cell.final_pct}});
    }

    const json results = {{"config", report.config},
                          {"arms",
                           {{"baseline", arm_to_json(report.baseline)},
                            {"stepcache", arm_to_json(report.stepcache)}}},
                          {"breakdown", std::move(breakdown)}};

    json mismatches = json::array();
    for (const MismatchRecord& m : report.mismatches) {
        mismatches.push_back({{"request_id", m.request_id},
                              {"prompt", m.prompt},
                              {"quality_check", m.quality_check ? "PASS" : "FAIL"},
                              {"final_check", m.final_check ? "PASS" : "FAIL"},
                              {"reason", m.reason}});
    }

    const auto write_file = [&](const std::string& name, const json& value) {
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + path.string() + " for writing");
        }
        out << value.dump(2) << '\n';
        out.flush();
        if (!out) {
            throw IoError("failed writing " + path.string());
        }
    };
    write_file("benchmark_results.json", results);
    write_file("benchmark_mismatches.json", mismatches);
}

}  // namespace stepcache

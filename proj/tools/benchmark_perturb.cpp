// Perturbation micro-benchmark driver: generates the math/JSON suite, runs
// the baseline and stepcache arms, prints a summary, and writes
// benchmark_results.json plus benchmark_mismatches.json.

#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "stepcache/bench.hpp"
#include "stepcache/errors.hpp"
#include "stepcache/http_backend.hpp"
#include "stepcache/sim_backend.hpp"

namespace {

void print_summary(const stepcache::BenchReport& report) {
    const auto& base = report.baseline.stats.aggregates;
    const auto& sc = report.stepcache.stats.aggregates;
    std::printf("%-28s %12s %12s\n", "Metric", "Baseline", "StepCache");
    std::printf("%-28s %12.3f %12.3f\n", "Mean latency (s)", base.mean_latency, sc.mean_latency);
    std::printf("%-28s %12.3f %12.3f\n", "Median latency (s)", base.median_latency,
                sc.median_latency);
    std::printf("%-28s %12.3f %12.3f\n", "p95 latency (s)", base.p95_latency, sc.p95_latency);
    std::printf("%-28s %12llu %12llu\n", "Total tokens",
                static_cast<unsigned long long>(base.total_tokens),
                static_cast<unsigned long long>(sc.total_tokens));
    std::printf("%-28s %12.1f %12.1f\n", "Tokens / request", base.tokens_per_request,
                sc.tokens_per_request);
    std::printf("%-28s %11.1f%% %11.1f%%\n", "Quality pass rate", base.quality_rate,
                sc.quality_rate);
    std::printf("%-28s %11.1f%% %11.1f%%\n", "Final-check pass rate", base.final_rate,
                sc.final_rate);
    std::printf("%-28s %12s %6.1f/%.1f/%.1f\n", "Reuse/Patch/Skip (%)", "-", sc.reuse_only_pct,
                sc.patch_pct, sc.skip_pct);

    std::printf("\n%-6s %-13s %10s %8s %8s %13s %8s\n", "Task", "Perturb", "ReuseOnly%",
                "Patch%", "Skip%", "TokensSaved", "Final%");
    for (const auto& cell : report.breakdown) {
        std::printf("%-6s %-13s %10.1f %8.1f %8.1f %13ld %8.1f\n", cell.task.c_str(),
                    cell.perturbation.c_str(), cell.reuse_only_pct, cell.patch_pct,
                    cell.skip_pct, cell.tokens_saved, cell.final_pct);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"StepCache perturbation micro-benchmark"};

    int n = 10;
    int k = 3;
    std::uint64_t seed = 42;
    int include_code = 0;
    std::string mode = "verify_patch";
    std::string backend_spec = "sim";
    std::string out_dir = ".";
    double sim_latency = 2.0;
    double wrong_constant = 0.0;
    double invalid_json = 0.0;
    double missing_key = 0.0;

    app.add_option("-n", n, "Base prompts per task")->check(CLI::PositiveNumber);
    app.add_option("-k", k, "Variants per perturbation")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Suite and backend seed");
    app.add_option("--include-code", include_code, "Include code tasks (unsupported, must be 0)");
    app.add_option("--mode", mode, "Cache configuration (verify_patch)");
    app.add_option("--backend", backend_spec, "'sim' or a chat-completions base URL");
    app.add_option("--out", out_dir, "Output directory for the report files");
    app.add_option("--sim-latency", sim_latency,
                   "Reported per-call latency of the simulated backend (s)");
    app.add_option("--fault-wrong-constant", wrong_constant,
                   "Simulated wrong_constant fault rate");
    app.add_option("--fault-invalid-json", invalid_json, "Simulated invalid_json fault rate");
    app.add_option("--fault-missing-key", missing_key, "Simulated missing_key fault rate");

    CLI11_PARSE(app, argc, argv);

    if (mode != "verify_patch") {
        std::fprintf(stderr, "unsupported --mode '%s' (expected verify_patch)\n", mode.c_str());
        return 2;
    }

    try {
        const stepcache::BenchSuite suite =
            stepcache::generate_suite(n, k, seed, include_code != 0);
        std::printf("suite: %zu evaluation requests, %zu warmup prompts (n=%d, k=%d, seed=%llu)\n\n",
                    suite.cases.size(), suite.warmup.size(), n, k,
                    static_cast<unsigned long long>(seed));

        std::function<std::shared_ptr<stepcache::LlmBackend>()> factory;
        if (backend_spec == "sim") {
            stepcache::SimulatedBackendConfig sim;
            sim.seed = seed;
            sim.per_call_latency_seconds = sim_latency;
            sim.set_all_faults({wrong_constant, invalid_json, missing_key});
            factory = [sim] { return std::make_shared<stepcache::SimulatedBackend>(sim); };
        } else {
            stepcache::HttpBackendConfig http;
            http.base_url = backend_spec;
            http = stepcache::apply_env_overrides(http);
            factory = [http] { return std::make_shared<stepcache::HttpChatBackend>(http); };
        }

        stepcache::BenchReport report = stepcache::run_benchmark(
            suite, factory,
            {{"mode", mode}, {"backend", backend_spec}, {"sim_latency", sim_latency}});
        print_summary(report);
        stepcache::write_reports(report, out_dir);
        std::printf("\nwrote %s/benchmark_results.json and %s/benchmark_mismatches.json\n",
                    out_dir.c_str(), out_dir.c_str());
        return 0;
    } catch (const stepcache::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

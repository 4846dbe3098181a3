// Command-line front end: batch analyses, artifact export, the HTTP service and the run simulator.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "runlens/service/export.hpp"
#include "runlens/service/server.hpp"
#include "runlens/simulate.hpp"

namespace {

using namespace runlens;

runlens::Server* active_server = nullptr;

void on_signal(int) {
    if (active_server) active_server->stop();
}

/// CLI analysis name -> engine operation.
std::string engine_op(const std::string& analysis) {
    if (analysis == "merge-graph") return "structure-graph";
    if (analysis == "ensemble-members") return "ensemble/members";
    if (analysis == "ensemble-predictions") return "ensemble/predictions";
    if (analysis == "ensemble-surfaces") return "ensemble/surfaces";
    return analysis;
}

int fail(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analytics for AutoML run histories"};
    app.require_subcommand(1);

    std::string run_path, out_dir = "runlens-out";
    std::uint64_t seed = 0;
    std::size_t cache_mb = 64;
    int port = 8080;
    std::string host = "127.0.0.1";

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Run one analysis (or 'all') and write its files to --out");
    std::string analysis, candidate, node, hp, brush, format;
    std::optional<double> at;
    std::optional<long> max_leaves, row, n_samples, target_class, n_repeats, grid_size, bins;
    std::vector<std::string> extra;
    analyze->add_option("analysis", analysis,
                        "overview | leaderboard | merge-graph | cpc | sampling | coverage | hp-importance | report | "
                        "surrogate | local-surrogate | effects | config | intermediate | ensemble-members | "
                        "ensemble-predictions | ensemble-surfaces | all")
        ->required();
    analyze->add_option("run_file", run_path, "Run history file")->envname("RUNLENS_RUN");
    analyze->add_option("--run", run_path, "Run history file")->envname("RUNLENS_RUN");
    analyze->add_option("--out", out_dir, "Output directory")->envname("RUNLENS_OUT");
    analyze->add_option("--seed", seed, "Analysis seed")->envname("RUNLENS_SEED");
    analyze->add_option("--at", at, "Time-lapse position (timestamp)");
    analyze->add_option("--candidate", candidate, "Candidate id");
    analyze->add_option("--node", node, "Pipeline node id ('source' for the raw data)");
    analyze->add_option("--hp", hp, "Hyperparameter name (sampling)");
    analyze->add_option("--max-leaf-nodes", max_leaves, "Surrogate size");
    analyze->add_option("--row", row, "Record index (local-surrogate)");
    analyze->add_option("--n-samples", n_samples, "Perturbation count (local-surrogate)");
    analyze->add_option("--target-class", target_class, "Class index for local explanations and PDP/ICE");
    analyze->add_option("--n-repeats", n_repeats, "Permutation repeats (effects)");
    analyze->add_option("--grid-size", grid_size, "PDP grid size (effects)");
    analyze->add_option("--bins", bins, "Histogram bins (sampling)");
    analyze->add_option("--brush", brush, "CPC brush as JSON, e.g. {\"hp:global:lr:C\":[0.1,1]}");
    analyze->add_option("--format", format, "json | csv | dot where the analysis supports it");
    analyze->add_option("--param", extra, "Extra key=value parameter");

    // export
    auto* exp = app.add_subcommand("export", "Write one portable artifact to --out");
    std::string artifact;
    exp->add_option("artifact", artifact, "intermediate-dataset | surrogate-tree | config | importance-table | coverage-embedding")->required();
    exp->add_option("run_file", run_path, "Run history file")->envname("RUNLENS_RUN");
    exp->add_option("--run", run_path, "Run history file")->envname("RUNLENS_RUN");
    exp->add_option("--out", out_dir, "Output directory")->envname("RUNLENS_OUT");
    exp->add_option("--seed", seed, "Analysis seed")->envname("RUNLENS_SEED");
    exp->add_option("--candidate", candidate, "Candidate id");
    exp->add_option("--node", node, "Pipeline node id");
    exp->add_option("--max-leaf-nodes", max_leaves, "Surrogate size");
    exp->add_option("--at", at, "Time-lapse position (coverage)");

    // serve
    auto* serve = app.add_subcommand("serve", "Start the HTTP JSON service");
    serve->add_option("--run", run_path, "Run file or directory of run files")->required()->envname("RUNLENS_RUN");
    serve->add_option("--port", port, "TCP port (0 picks a free one)")->envname("RUNLENS_PORT");
    serve->add_option("--host", host, "Bind address")->envname("RUNLENS_HOST");
    serve->add_option("--seed", seed, "Analysis seed")->envname("RUNLENS_SEED");
    serve->add_option("--cache-mb", cache_mb, "Response cache size in MiB")->envname("RUNLENS_CACHE_MB");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Write a synthetic random-search run and its dataset to --out");
    SimulationOptions sopt;
    std::string run_file = "simulated_run.json";
    sim->add_option("--out", out_dir, "Output directory")->envname("RUNLENS_OUT");
    sim->add_option("--seed", sopt.seed, "Simulation seed")->envname("RUNLENS_SEED");
    sim->add_option("--candidates", sopt.candidates, "Number of candidates");
    sim->add_option("--rows", sopt.rows, "Dataset rows");
    sim->add_option("--analysis-seed", sopt.analysis_seed, "Split seed used for the recorded performances");
    sim->add_option("--crash-rate", sopt.crash_rate, "Share of crashed candidates");
    sim->add_option("--run-id", sopt.run_id, "Run id");
    sim->add_option("--file", run_file, "Run file name");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            write_simulation(simulate_random_search(sopt), out_dir, run_file);
            std::cout << (std::filesystem::path(out_dir) / run_file).string() << "\n";
            return 0;
        }

        EngineConfig cfg;
        cfg.seed = seed;
        cfg.cache_bytes = cache_mb << 20;
        Engine engine(cfg);
        if (run_path.empty()) return fail("no run file given (argument, --run or RUNLENS_RUN)");
        const auto ids = engine.load_path(run_path);

        if (*serve) {
            Server server(engine);
            const int bound = server.bind(host, port);
            active_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serving " << ids.size() << " run(s) on http://" << host << ":" << bound << "\n" << std::flush;
            server.run();
            return 0;
        }

        const auto& run_id = ids.front();
        if (*exp) {
            json req{{"run_id", run_id}, {"artifact", artifact}};
            if (!candidate.empty()) req["candidate_id"] = candidate;
            if (!node.empty()) req["node"] = node;
            if (max_leaves) req["max_leaf_nodes"] = std::to_string(*max_leaves);
            if (at) req["at"] = format_number(*at);
            const auto file = engine.export_artifact(req);
            write_file(out_dir, file.filename, file.content);
            std::cout << (std::filesystem::path(out_dir) / file.filename).string() << "\n";
            return 0;
        }

        if (analysis == "all") {
            const auto files = sweep(engine, run_id, out_dir);
            std::size_t failed = 0;
            for (const auto& f : files) failed += f.status != 200;
            std::cout << files.size() << " files written to " << out_dir << " (" << failed << " analyses reported errors)\n";
            return 0;
        }

        AnalysisRequest req{run_id, candidate, engine_op(analysis), {}};
        auto set = [&](const char* k, const auto& v) {
            if (v) req.params[k] = std::to_string(*v);
        };
        if (at) req.params["at"] = format_number(*at);
        if (!node.empty()) req.params["node"] = node;
        if (!hp.empty()) req.params["hp"] = hp;
        if (!brush.empty()) req.params["brush"] = brush;
        if (!format.empty()) req.params["format"] = format;
        set("max_leaf_nodes", max_leaves);
        set("row", row);
        set("n_samples", n_samples);
        set("target_class", target_class);
        set("n_repeats", n_repeats);
        set("grid_size", grid_size);
        set("bins", bins);
        for (const auto& kv : extra) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) return fail("--param expects key=value, got '" + kv + "'");
            req.params[kv.substr(0, eq)] = kv.substr(eq + 1);
        }

        // Some analyses produce two files: a graph as DOT and JSON, coverage as CSV and JSON.
        std::vector<AnalysisRequest> reqs{req};
        if (analysis == "merge-graph" && format.empty()) {
            reqs[0].params["format"] = "dot";
            reqs.push_back(req);
        } else if (analysis == "coverage" && format.empty()) {
            reqs[0].params["format"] = "csv";
            reqs.push_back(req);
        }
        int code = 0;
        for (const auto& r : reqs) {
            const auto stem = analysis == "merge-graph" ? "merge-graph" : (analysis == "sampling" ? "sampling-" + hp : "");
            const auto written = write_analysis(engine, r, out_dir, stem);
            const auto path = (std::filesystem::path(out_dir) / written.path).string();
            if (written.status != 200) {
                std::cerr << "error: " << read_text_file(path) << "\n";
                code = 1;
            } else {
                std::cout << path << "\n";
            }
        }
        return code;
    } catch (const Error& e) {
        return fail(std::string(to_string(e.kind())) + ": " + e.what());
    } catch (const std::exception& e) {
        return fail(e.what());
    }
}

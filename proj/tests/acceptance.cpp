// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <thread>

#include "runlens/service/server.hpp"
#include "runlens/simulate.hpp"
#include "support.hpp"

using namespace runlens;
using namespace testing_support;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Records the first few failures and keeps the verdict.
struct Checker {
    Outcome out;
    int shown = 0;
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        out.pass = false;
        if (shown++ < 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("runlens-acceptance-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = n(rng);
    return x;
}

// ------------------------------------------------------------------ 1

Outcome assignment_oracle() {
    Checker c;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(2, 7), value(0, 50);
    const auto t0 = Clock::now();
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = value(rng);
        const auto a = hungarian(m);
        double recomputed = 0.0;
        for (int i = 0; i < n; ++i) recomputed += m(i, a.row_to_col[static_cast<std::size_t>(i)]);
        const double brute = brute_force_assignment(m);
        c.expect(a.cost == brute && recomputed == brute,
                 "trial " + std::to_string(trial) + ": " + format_number(a.cost) + " vs " + format_number(brute));
    }
    const double s = seconds_since(t0);
    c.expect(s < 5.0, "took " + format_number(s) + " s");
    if (c.out.pass) c.out.detail = "200 matrices, " + format_number(std::round(s * 1000) / 1000) + " s";
    return c.out;
}

// ------------------------------------------------------------------ 2

Outcome merge_graph_behaviour() {
    Checker c;
    const auto expected = json::parse(slurp(golden("merge_expected.json")));
    std::map<std::string, std::vector<std::array<std::size_t, 3>>> seen;
    for (const auto& [file, entry] : expected.items()) {
        auto run = load_run_history(golden(file), false);
        SnapshotCache cache(run);
        MergeOracle oracle;
        const auto& frames = entry.at("frames_nodes_edges_maxpath");
        c.expect(frames.size() == run.candidates.size(), file + ": frame count");
        for (std::size_t k = 0; k < run.candidates.size() && k < frames.size(); ++k) {
            const auto g = cache.at_time(run.candidates[k].timestamp);
            const auto f = oracle.add(run.candidates[k].pipeline);
            const std::array<std::size_t, 3> got{g.size(), g.edges().size(), static_cast<std::size_t>(g.max_path_length())};
            seen[file].push_back(got);
            c.expect(got[0] == frames[k][0].get<std::size_t>() && got[1] == frames[k][1].get<std::size_t>() &&
                         got[2] == frames[k][2].get<std::size_t>(),
                     file + " frame " + std::to_string(k));
            c.expect(got[0] == f.nodes && got[1] == f.edges && static_cast<int>(got[2]) == f.max_path_length,
                     file + " frame " + std::to_string(k) + " disagrees with the exhaustive oracle");
        }
    }

    const auto& fixed = seen["fixed_run.json"];
    for (const auto& f : fixed) c.expect(f == fixed.front(), "fixed run graph changes over time");

    auto tmpl = load_run_history(golden("template_run.json"), false);
    std::size_t union_size = 0;
    for (const auto& step : tmpl.search_spaces.front().structure_template()->at("steps")) union_size += step.at("choices").size();
    const auto& tf = seen["template_run.json"];
    for (std::size_t k = 1; k < tf.size(); ++k) c.expect(tf[k][0] >= tf[k - 1][0], "template node count shrinks");
    c.expect(!tf.empty() && tf.back()[0] == union_size, "template run does not saturate at the algorithm union");
    c.expect(tf.size() >= 2 && tf[tf.size() - 2][0] == union_size, "template run saturates only at the last frame");
    c.expect(!tf.empty() && tf.front()[0] < union_size, "template run starts saturated");

    const auto& ff = seen["flexible_run.json"];
    for (std::size_t k = 1; k < ff.size(); ++k) c.expect(ff[k][2] > ff[k - 1][2], "flexible max path not strictly increasing");
    if (c.out.pass)
        c.out.detail = "fixed constant at " + std::to_string(fixed.front()[0]) + " nodes, template saturates at " +
                       std::to_string(union_size) + ", flexible path 1.." + std::to_string(ff.back()[2]);
    return c.out;
}

// ------------------------------------------------------------------ 3

/// Random active configuration, padded with defaults as the coverage view does.
Config random_config(const SearchSpace& space, Rng& rng) {
    Config cfg;
    for (const auto& hp : space.hyperparameters())
        if (space.is_active(hp.name, cfg)) cfg[hp.name] = detail::sample_value(hp, rng);
    return pad_with_defaults(cfg, space);
}

Outcome metric_properties() {
    Checker c;
    const auto space = detail::simulation_space();
    Rng rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto x = random_config(space, rng);
        const auto y = random_config(space, rng);
        const auto z = random_config(space, rng);
        const double xy = distance(x, y, space);
        const double yx = distance(y, x, space);
        const double yz = distance(y, z, space);
        const double xz = distance(x, z, space);
        c.expect(distance(x, x, space) == 0.0, "d(x,x) != 0 at trial " + std::to_string(trial));
        c.expect(xy == yx, "asymmetric at trial " + std::to_string(trial));
        c.expect(xz <= xy + yz + 1e-12, "triangle violated at trial " + std::to_string(trial));
        worst = std::max(worst, xz - (xy + yz));
    }
    if (c.out.pass) c.out.detail = "1000 triples, max triangle slack " + format_number(worst);
    return c.out;
}

// ------------------------------------------------------------------ 4

Outcome mds_recovery() {
    Checker c;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::vector<Point2> pts(50);
    for (auto& p : pts) p = {u(rng), u(rng)};
    Matrix d(50, 50);
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) d(i, j) = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
    auto check = [&](const Matrix& dm, const std::string& what) {
        const auto e = embed(dm);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < dm.rows(); ++i)
            for (Eigen::Index j = 0; j < dm.rows(); ++j) {
                const auto& a = e[static_cast<std::size_t>(i)];
                const auto& b = e[static_cast<std::size_t>(j)];
                worst = std::max(worst, std::abs(std::hypot(a.x - b.x, a.y - b.y) - dm(i, j)));
            }
        c.expect(worst <= 1e-6, what + " error " + format_number(worst));
        return worst;
    };
    const double w50 = check(d, "50 points");
    Matrix tri(3, 3);
    tri << 0, 3, 4, 3, 0, 5, 4, 5, 0;
    const double w3 = check(tri, "3-4-5 triangle");
    if (c.out.pass) c.out.detail = "max error " + format_number(std::max(w50, w3));
    return c.out;
}

// ------------------------------------------------------------------ 5

Outcome fanova_oracle() {
    Checker c;
    const auto f = [](double a, double) { return std::sin(3.0 * a) + 0.5 * a; };
    const auto grid = grid_decomposition(f);
    double min_a = 1.0, max_b = 0.0, max_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto run = importance_history(f, 500, seed);
        FanovaOptions opt;
        opt.seed = seed;
        const auto t = hp_importance(run, opt);
        const double ia = importance_of(t, "a"), ib = importance_of(t, "b");
        c.expect(ia >= 0.8, "seed " + std::to_string(seed) + ": importance(a) = " + format_number(ia));
        c.expect(ib <= 0.1, "seed " + std::to_string(seed) + ": importance(b) = " + format_number(ib));
        const double gap = std::max(std::abs(ia - grid.first), std::abs(ib - grid.second));
        c.expect(gap <= 0.1, "seed " + std::to_string(seed) + ": grid disagreement " + format_number(gap));
        min_a = std::min(min_a, ia);
        max_b = std::max(max_b, ib);
        max_gap = std::max(max_gap, gap);
    }
    if (c.out.pass)
        c.out.detail = "min imp(a) " + format_number(std::round(min_a * 1000) / 1000) + ", max imp(b) " +
                       format_number(std::round(max_b * 1000) / 1000) + ", max grid gap " +
                       format_number(std::round(max_gap * 1000) / 1000);
    return c.out;
}

// ------------------------------------------------------------------ 6

Outcome explainer_oracles() {
    Checker c;
    // permutation importance of an unused feature
    {
        Table x = numeric_table(gaussian_matrix(400, 3, 6));
        std::vector<int> y;
        for (std::size_t i = 0; i < x.rows(); ++i) y.push_back(x.column(0).values[i] + 0.5 * x.column(1).values[i] > 0 ? 1 : 0);
        models::TreeParams p;
        p.max_depth = 4;
        models::DecisionTreeClassifier clf(p);
        clf.fit(x.to_matrix(), y, 2);
        FunctionOracle oracle(2, [&](const Table& t) { return clf.predict_proba(t.to_matrix()); });
        const auto imp = permutation_importance(oracle, x, y, 5, 0);
        c.expect(std::abs(imp[2].mean) <= 0.01, "unused feature importance " + format_number(imp[2].mean));
    }
    // PDP of the separable oracle at x1 = 5
    {
        Matrix m = gaussian_matrix(300, 3, 7);
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, 0) = 10.0 * static_cast<double>(i % 31) / 30.0;
        Table x = numeric_table(m);
        auto oracle = binary_oracle([](const auto& r) { return std::clamp(0.1 * r(0), 0.0, 1.0); });
        const double pd = partial_dependence(oracle, x, "x1", 5.0, 1);
        c.expect(std::abs(pd - 0.5) <= 0.02, "PDP(5) = " + format_number(pd));
    }
    // global surrogate of an in-family tree
    {
        Table x = numeric_table(gaussian_matrix(500, 3, 8));
        std::vector<int> y;
        for (std::size_t i = 0; i < x.rows(); ++i)
            y.push_back(x.column(0).values[i] > 0.3 || x.column(2).values[i] < -0.5 ? 1 : 0);
        models::TreeParams p;
        p.max_depth = 3;
        models::DecisionTreeClassifier box(p);
        box.fit(x.to_matrix(), y, 2);
        FunctionOracle oracle(2, [&](const Table& t) { return box.predict_proba(t.to_matrix()); });
        const auto s = global_surrogate(oracle, x, std::max<std::size_t>(2, box.tree().leaf_count()));
        c.expect(s.fidelity == 1.0, "surrogate fidelity " + format_number(s.fidelity));
    }
    // LIME sign recovery
    {
        auto oracle = binary_oracle([](const auto& r) { return sigmoid(3 * r(0) - 2 * r(1)); });
        int recovered = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Matrix m = gaussian_matrix(300, 2, 100 + seed);
            m.row(0).setZero();
            LimeOptions opt;
            opt.seed = seed;
            opt.target_class = 1;
            const auto e = local_surrogate(oracle, numeric_table(m), 0, opt);
            recovered += e.weights[0] > 0 && e.weights[1] < 0;
        }
        c.expect(recovered == 10, "LIME signs recovered for " + std::to_string(recovered) + "/10 seeds");
    }
    if (c.out.pass) c.out.detail = "permutation, PDP, surrogate fidelity, LIME 10/10";
    return c.out;
}

// ------------------------------------------------------------------ 7

Outcome metric_examples() {
    Checker c;
    const std::vector<int> y{0, 0, 1, 1, 2, 2}, yhat{0, 1, 1, 1, 2, 0};
    const auto cm = confusion_matrix(y, yhat, 3);
    c.expect(cm == std::vector<std::vector<std::size_t>>{{1, 1, 0}, {0, 2, 0}, {1, 0, 1}}, "confusion matrix");
    const auto s = class_scores(cm);
    c.expect(s[0].precision == 0.5 && s[0].recall == 0.5, "class 0 precision/recall");
    c.expect(s[1].precision == 2.0 / 3.0 && s[1].recall == 1.0, "class 1 precision/recall");
    c.expect(s[2].precision == 1.0 && s[2].recall == 0.5, "class 2 precision/recall");
    c.expect(accuracy(y, yhat) == 4.0 / 6.0, "accuracy");
    const auto roc = roc_curve({0.1, 0.4, 0.35, 0.8}, {false, false, true, true});
    c.expect(roc.auc && *roc.auc == 0.75, "AUC of the four-point example");
    const auto perfect = roc_curve({0.2, 0.9, 0.1, 0.7}, {false, true, false, true});
    c.expect(perfect.auc && *perfect.auc == 1.0, "AUC of a perfect ranking");
    const auto tied = roc_curve({0.5, 0.5, 0.5, 0.5}, {false, true, false, true});
    c.expect(tied.auc && *tied.auc == 0.5, "AUC of constant scores");
    c.expect(!roc_curve({0.3, 0.6}, {false, false}).auc, "AUC without positives must be null");
    const auto zero = class_scores(confusion_matrix({0, 0}, {0, 0}, 2));
    c.expect(zero[1].precision == 0.0 && zero[1].recall == 0.0, "zero-denominator scores");
    if (c.out.pass) c.out.detail = "confusion, precision, recall, accuracy, AUC examples exact";
    return c.out;
}

// ------------------------------------------------------------------ 8

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path().string());
    return files;
}

/// Sweeps one run file twice into separate directories and replays its analyses through a
/// fresh engine twice (miss, then hit).
void check_run_determinism(Checker& c, const std::string& path, std::size_t& files, std::size_t& exports, std::size_t& responses) {
    EngineConfig cfg;
    cfg.seed = 42;
    const auto d1 = scratch("sweep-a"), d2 = scratch("sweep-b");
    {
        Engine a(cfg), b(cfg);
        const auto id = a.load_path(path).front();
        b.load_path(path);
        sweep(a, id, d1);
        sweep(b, id, d2);
        const auto t1 = read_tree(d1), t2 = read_tree(d2);
        files += t1.size();
        c.expect(t1.size() == t2.size(), id + ": sweeps wrote different file sets");
        for (const auto& [rel, content] : t1) {
            exports += rel.rfind("exports/", 0) == 0;
            auto it = t2.find(rel);
            c.expect(it != t2.end() && it->second == content, id + ": file differs: " + rel);
        }

        Engine fresh(cfg);
        fresh.load_path(path);
        const auto& run = fresh.state(id).run();
        std::vector<AnalysisRequest> reqs{{id, "", "overview", {}},
                                          {id, "", "leaderboard", {}},
                                          {id, "", "structure-graph", {{"format", "dot"}}},
                                          {id, "", "cpc", {}},
                                          {id, "", "coverage", {{"format", "csv"}}},
                                          {id, "", "hp-importance", {}},
                                          {id, "", "ensemble/predictions", {}},
                                          {id, "", "ensemble/surfaces", {}}};
        for (const auto& hp : run.merged_space.hyperparameters()) reqs.push_back({id, "", "sampling", {{"hp", hp.name}}});
        for (const auto& cand : run.candidates)
            for (const auto* op : {"report", "surrogate", "local-surrogate", "effects"}) reqs.push_back({id, cand.id, op, {}});
        for (const auto& r : reqs) {
            const auto miss = fresh.handle(r);
            const auto hit = fresh.handle(r);
            // error documents are recomputed rather than cached, but must still be identical
            if (miss.status == 200) c.expect(!miss.cache_hit && hit.cache_hit, id + " " + r.op + " " + r.candidate_id + ": cache state");
            c.expect(miss.status == hit.status, id + " " + r.op + " " + r.candidate_id + ": status differs");
            c.expect(miss.body == hit.body, id + " " + r.op + " " + r.candidate_id + ": hit differs from miss");
        }
        responses += reqs.size();
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

Outcome determinism() {
    Checker c;
    std::size_t files = 0, exports = 0, responses = 0;
    check_run_determinism(c, golden("template_run.json"), files, exports, responses);

    // the golden runs are below the importance minimum, so a seeded simulated run covers that export
    const auto sim = scratch("sweep-sim");
    SimulationOptions opt;
    opt.candidates = 12;
    opt.rows = 150;
    write_simulation(simulate_random_search(opt), sim.string(), "run.json");
    check_run_determinism(c, (sim / "run.json").string(), files, exports, responses);
    fs::remove_all(sim);

    if (c.out.pass)
        c.out.detail = std::to_string(files) + " files (" + std::to_string(exports) + " exports) identical, " +
                       std::to_string(responses) + " responses equal across miss/hit";
    return c.out;
}

// ------------------------------------------------------------------ 9

Outcome end_to_end() {
    Checker c;
    const auto t0 = Clock::now();
    const auto dir = scratch("e2e");
    SimulationOptions opt;
    opt.candidates = 30;
    opt.rows = 500;
    write_simulation(simulate_random_search(opt), dir.string(), "run.json");

    Engine engine;
    const auto run_id = engine.load_path((dir / "run.json").string()).front();
    const auto run = engine.state(run_id).run();
    std::size_t four_step = 0;
    for (const auto& cand : run.candidates) four_step += cand.pipeline.nodes().size() == 4;
    c.expect(four_step == run.candidates.size(), "not every pipeline has 4 steps");
    c.expect(run.data().rows() == 500, "dataset rows");

    Server server(engine);
    const int port = server.bind("127.0.0.1", 0);
    std::thread thread([&] { server.run(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(120, 0);

    std::size_t requests = 0;
    auto get = [&](const std::string& path) {
        ++requests;
        auto r = cli.Get(path);
        c.expect(r && r->status == 200, "GET " + path + " -> " + (r ? std::to_string(r->status) + " " + r->body.substr(0, 160) : "no response"));
    };
    auto post = [&](const json& body) {
        ++requests;
        auto r = cli.Post("/export", body.dump(), "application/json");
        c.expect(r && r->status == 200 && !r->body.empty(), "POST /export " + body.dump() + " -> " + (r ? std::to_string(r->status) : "none"));
    };

    const std::string base = "/runs/" + run_id;
    get("/runs");
    for (const auto* op : {"overview", "leaderboard", "structure-graph", "structure-graph?format=dot", "cpc", "coverage",
                           "coverage?format=csv", "hp-importance", "hp-importance?format=csv", "ensemble/members",
                           "ensemble/predictions", "ensemble/surfaces"})
        get(base + "/" + op);
    get(base + "/structure-graph?at=" + format_number(run.candidates[run.candidates.size() / 2].timestamp));
    for (const auto& hp : run.merged_space.hyperparameters()) get(base + "/sampling/" + hp.name);
    for (const auto& cand : run.candidates) {
        const auto cb = base + "/candidates/" + cand.id;
        for (const auto* op : {"config", "report", "surrogate", "local-surrogate", "effects"}) get(cb + "/" + op);
        get(cb + "/intermediate/source");
        for (const auto& n : cand.pipeline.nodes()) {
            get(cb + "/intermediate/" + n.id);
            post({{"run_id", run_id}, {"artifact", "intermediate-dataset"}, {"candidate_id", cand.id}, {"node", n.id}});
        }
        post({{"run_id", run_id}, {"artifact", "config"}, {"candidate_id", cand.id}});
        post({{"run_id", run_id}, {"artifact", "surrogate-tree"}, {"candidate_id", cand.id}});
        post({{"run_id", run_id}, {"artifact", "intermediate-dataset"}, {"candidate_id", cand.id}});
    }
    post({{"run_id", run_id}, {"artifact", "importance-table"}});
    post({{"run_id", run_id}, {"artifact", "coverage-embedding"}});

    server.stop();
    thread.join();
    fs::remove_all(dir);
    const double s = seconds_since(t0);
    c.expect(s < 60.0, "took " + format_number(s) + " s");
    if (c.out.pass)
        c.out.detail = std::to_string(requests) + " requests, 0 errors, " + format_number(std::round(s * 100) / 100) + " s";
    return c.out;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 assignment solver matches brute force", assignment_oracle},
        {"2 merge graph on golden runs", merge_graph_behaviour},
        {"3 configuration distance is a metric", metric_properties},
        {"4 MDS recovers planar distances", mds_recovery},
        {"5 hyperparameter importance oracle", fanova_oracle},
        {"6 explainer oracles", explainer_oracles},
        {"7 classification metrics", metric_examples},
        {"8 determinism and cache idempotence", determinism},
        {"9 end-to-end simulated run", end_to_end},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << "  (" << o.detail << ")\n" << std::flush;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << "\n";
    return failures ? 1 : 0;
}

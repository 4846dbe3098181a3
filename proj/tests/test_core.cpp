#include <gtest/gtest.h>

#include "support.hpp"

using namespace runlens;
using namespace testing_support;

// ------------------------------------------------------------------ search space

namespace {

SearchSpace chain_space() {
    return SearchSpace({
        cat_hp("a", {"x", "y"}),
        cat_hp("b", {"p", "q"}, Condition{"a", std::string("x")}),
        cat_hp("c", {"r", "s"}, Condition{"b", std::string("p")}),
        num_hp("d", 0, 10, 5, HpKind::continuous, Condition{"c", std::string("r")}),
    });
}

}  // namespace

TEST(SearchSpace, DepthFollowsConditionChain) {
    auto s = chain_space();
    EXPECT_EQ(s.depth("a"), 1);
    EXPECT_EQ(s.depth("b"), 2);
    EXPECT_EQ(s.depth("d"), 4);
    try {
        s.depth("nope");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::not_found);
    }
}

TEST(SearchSpace, ActivationFollowsParents) {
    auto s = chain_space();
    Config cfg{{"a", std::string("y")}, {"b", std::string("p")}};
    EXPECT_TRUE(s.is_active("a", cfg));
    EXPECT_FALSE(s.is_active("b", cfg));
    EXPECT_FALSE(s.is_active("c", cfg));
}

TEST(SearchSpace, PadWithDefaults) {
    SearchSpace one({num_hp("a", 0, 1, 0.5)});
    auto padded = pad_with_defaults({}, one);
    EXPECT_EQ(padded.size(), 1u);
    EXPECT_EQ(as_number(padded.at("a")), 0.5);

    SearchSpace two({num_hp("a", 0, 5, 0), cat_hp("b", {"x", "z"})});
    padded = pad_with_defaults({{"a", 1.0}}, two);
    EXPECT_EQ(as_number(padded.at("a")), 1.0);
    EXPECT_EQ(as_string(padded.at("b")), "x");

    Config full{{"a", 2.0}, {"b", std::string("z")}};
    EXPECT_EQ(pad_with_defaults(full, two), full);
}

TEST(SearchSpace, MergeUsesWidestBoundsAndUnion) {
    SearchSpace s1({num_hp("a", 0, 5, 1)});
    SearchSpace s2({num_hp("a", 0, 10, 1)});
    SearchSpace s3({cat_hp("b", {"x"})});
    auto single = merge_search_spaces({s1});
    EXPECT_EQ(single.size(), 1u);
    EXPECT_EQ(single.at("a").upper, 5.0);
    auto widened = merge_search_spaces({s1, s2});
    EXPECT_EQ(widened.at("a").lower, 0.0);
    EXPECT_EQ(widened.at("a").upper, 10.0);
    auto both = merge_search_spaces({s1, s3});
    EXPECT_TRUE(both.contains("a"));
    EXPECT_TRUE(both.contains("b"));
}

// ------------------------------------------------------------------ interchange file

TEST(RunHistoryFile, TinyRunFieldByField) {
    auto run = load_run_history(golden("tiny_run.json"));
    EXPECT_EQ(run.run_id, "tiny");
    EXPECT_EQ(run.search_spaces.size(), 1u);
    ASSERT_EQ(run.candidates.size(), 3u);
    const auto& c1 = run.candidate("c1");
    EXPECT_EQ(c1.timestamp, 1.0);
    EXPECT_EQ(c1.pipeline.size(), 2u);
    EXPECT_EQ(c1.pipeline.nodes()[0].primitive, "standard-scaler");
    EXPECT_EQ(c1.pipeline.nodes()[1].primitive, "decision-tree");
    EXPECT_EQ(c1.pipeline.nodes()[1].config_key_prefix, "dt:");
    EXPECT_EQ(as_number(c1.config.at("dt:max_depth")), 2.0);
    EXPECT_EQ(*c1.validation_performance, 0.8);
    EXPECT_EQ(*run.candidate("c2").validation_performance, 0.9);
    EXPECT_EQ(run.candidate("c3").fit_duration, 0.04);
    ASSERT_TRUE(run.ensemble);
    EXPECT_EQ(run.ensemble->members.size(), 3u);
    ASSERT_TRUE(run.dataset);
    EXPECT_EQ(run.dataset->rows(), 80u);
    EXPECT_EQ(run.dataset->class_labels, (std::vector<std::string>{"no", "yes"}));
}

namespace {

json minimal_doc() {
    return json::parse(R"({
      "version": "1.0",
      "run": {"id": "r"},
      "search_spaces": [{"hyperparameters": [
          {"name": "dt:max_depth", "kind": "numeric-integer", "lower": 0, "upper": 10, "default": 3}]}],
      "candidates": [],
      "dataset_ref": {"path": "none.csv", "target": "label"}
    })");
}

}  // namespace

TEST(RunHistoryFile, OutOfBoundsValueNamesHyperparameter) {
    auto doc = minimal_doc();
    doc["candidates"].push_back(json::parse(R"({"id": "c1", "timestamp": 1, "config": {"dt:max_depth": 15},
        "pipeline": {"nodes": [{"id": "n", "primitive": "decision-tree"}], "edges": []}})"));
    try {
        run_history_from_json(doc, std::nullopt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::validation);
        EXPECT_NE(std::string(e.what()).find("dt:max_depth"), std::string::npos);
    }
}

TEST(RunHistoryFile, EmptyCandidateListIsValid) {
    auto run = run_history_from_json(minimal_doc(), std::nullopt);
    EXPECT_TRUE(run.candidates.empty());
    Engine engine;
    engine.add_run(run);
    auto overview = json::parse(engine.analyze({"r", "", "overview", {}}));
    EXPECT_EQ(overview.at("candidates"), 0);
    EXPECT_EQ(overview.at("scored"), 0);
}

TEST(RunHistoryFile, SchemaViolationNamesPath) {
    auto doc = minimal_doc();
    doc.erase("run");
    try {
        run_history_from_json(doc, std::nullopt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::load);
        EXPECT_NE(std::string(e.what()).find("$.run"), std::string::npos);
    }
}

TEST(RunHistoryFile, RoundTripsThroughJson) {
    auto run = load_run_history(golden("template_run.json"), false);
    auto again = run_history_from_json(to_json(run), std::nullopt);
    EXPECT_EQ(to_json(again).dump(), to_json(run).dump());
}

// ------------------------------------------------------------------ assignment

TEST(Hungarian, HandExamples) {
    Matrix a(2, 2);
    a << 1, 2, 2, 4;
    auto r = hungarian(a);
    EXPECT_EQ(r.cost, 4.0);
    EXPECT_EQ(r.row_to_col, (std::vector<int>{1, 0}));
    Matrix b(2, 2);
    b << 0, 9, 9, 0;
    r = hungarian(b);
    EXPECT_EQ(r.cost, 0.0);
    EXPECT_EQ(r.row_to_col, (std::vector<int>{0, 1}));
}

TEST(Hungarian, MatchesBruteForceOnRandomMatrices) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + trial % 7;
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = std::uniform_int_distribution<int>(0, 9)(rng) * 0.5;
        auto r = hungarian(m);
        EXPECT_EQ(r.cost, brute_force_assignment(m));
        std::set<int> cols(r.row_to_col.begin(), r.row_to_col.end());
        EXPECT_EQ(cols.size(), static_cast<std::size_t>(n));
    }
}

TEST(Hungarian, RejectsBadInput) {
    Matrix m(2, 3);
    m.setZero();
    EXPECT_THROW(hungarian(m), Error);
    Matrix neg(1, 1);
    neg << -1;
    EXPECT_THROW(hungarian(neg), Error);
}

// ------------------------------------------------------------------ structure graph

TEST(CostMatrix, HandExamples) {
    auto ab = chain({"A", "B"});
    auto cm = build_cost_matrix(ab, ab);
    EXPECT_EQ(cm.cost(0, 0), 0.0);
    EXPECT_EQ(cm.cost(1, 1), 0.0);

    auto ac = chain({"A", "C"});
    cm = build_cost_matrix(ab, ac);
    EXPECT_EQ(cm.cost(0, 0), 0.0);
    EXPECT_EQ(cm.cost(1, 1), 1.0);

    auto a = chain({"A"});
    auto ba = chain({"B", "A"});
    cm = build_cost_matrix(a, ba);
    EXPECT_EQ(cm.cost.rows(), 2);
    EXPECT_EQ(cm.cost.cols(), 2);
    EXPECT_EQ(cm.real_rows, 1u);
    EXPECT_EQ(cm.real_cols, 2u);
    // A sits on layer 0 in g1 and layer 1 in g2
    EXPECT_EQ(cm.cost(0, 1), 0.5);
    EXPECT_EQ(cm.cost(1, 0), 1.0);
}

TEST(Merge, HandExamples) {
    MergedGraph g = merge({}, chain({"A", "B"}), "c1");
    g = merge(g, chain({"A", "B"}), "c2");
    ASSERT_EQ(g.size(), 2u);
    for (const auto& n : g.nodes()) EXPECT_EQ(n.occurrences(), 2u);

    MergedGraph h = merge({}, chain({"A", "B"}), "c1");
    h = merge(h, chain({"A", "C"}), "c2");
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h.nodes()[0].primitive, "A");
    EXPECT_EQ(h.nodes()[0].occurrences(), 2u);
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& e : h.edges())
        if (e.from >= 0) edges.insert({h.nodes()[static_cast<std::size_t>(e.from)].primitive, h.nodes()[static_cast<std::size_t>(e.to)].primitive});
    EXPECT_EQ(edges, (std::set<std::pair<std::string, std::string>>{{"A", "B"}, {"A", "C"}}));
}

TEST(Merge, CountingIdentityOnRandomGraphs) {
    std::mt19937_64 rng(5);
    const std::vector<std::string> alphabet{"A", "B", "C"};
    for (int trial = 0; trial < 40; ++trial) {
        MergedGraph g;
        MergeOracle oracle;
        for (int step = 0; step < 3; ++step) {
            std::vector<std::string> prims;
            const int len = 1 + static_cast<int>(rng() % 3);
            for (int i = 0; i < len; ++i) prims.push_back(alphabet[rng() % alphabet.size()]);
            const auto before = g.size();
            auto next = merge(g, chain(prims), "c" + std::to_string(step));
            auto f = oracle.add(chain(prims));
            std::size_t matched = 0;
            for (const auto& n : next.nodes())
                if (static_cast<std::size_t>(n.id) < before && n.occurrences() > g.nodes()[static_cast<std::size_t>(n.id)].occurrences()) ++matched;
            EXPECT_EQ(next.size(), before + prims.size() - matched);
            EXPECT_TRUE(next.is_acyclic());
            if (f.unambiguous) {
                EXPECT_EQ(next.size(), f.nodes);
                EXPECT_EQ(next.edges().size(), f.edges);
                EXPECT_EQ(matched, f.zero_matches);
            }
            g = next;
        }
    }
}

TEST(Merge, MembersOfOneCandidateAreDisjoint) {
    auto run = load_run_history(golden("template_run.json"), false);
    auto g = snapshot(run, std::numeric_limits<double>::infinity());
    for (const auto& [cid, mapping] : g.mapping()) {
        std::set<int> targets;
        for (const auto& [node, mid] : mapping) EXPECT_TRUE(targets.insert(mid).second) << cid;
    }
}

TEST(Snapshot, TimeSelectsPrefix) {
    auto run = load_run_history(golden("fixed_run.json"), false);
    EXPECT_TRUE(snapshot(run, 0.0).empty());
    auto all = snapshot(run, std::numeric_limits<double>::infinity());
    EXPECT_EQ(all.candidate_count(), 6u);
    auto three = snapshot(run, 3.5);
    EXPECT_EQ(three.candidate_count(), 3u);
    SnapshotCache cache(run);
    EXPECT_EQ(to_json(cache.at_time(3.5)).dump(), to_json(three).dump());
    EXPECT_EQ(to_json(cache.at_time(1e9)).dump(), to_json(all).dump());
}

TEST(Snapshot, GoldenRunsMatchFrozenCounts) {
    const auto expected = json::parse(slurp(golden("merge_expected.json")));
    for (const auto& [file, entry] : expected.items()) {
        auto run = load_run_history(golden(file), false);
        SnapshotCache cache(run);
        MergeOracle oracle;
        const auto& frames = entry.at("frames_nodes_edges_maxpath");
        ASSERT_EQ(frames.size(), run.candidates.size()) << file;
        for (std::size_t k = 0; k < frames.size(); ++k) {
            auto g = cache.at_time(run.candidates[k].timestamp);
            auto f = oracle.add(run.candidates[k].pipeline);
            EXPECT_TRUE(f.unambiguous);
            EXPECT_EQ(g.size(), frames[k][0].get<std::size_t>()) << file << " frame " << k;
            EXPECT_EQ(g.edges().size(), frames[k][1].get<std::size_t>()) << file << " frame " << k;
            EXPECT_EQ(g.max_path_length(), frames[k][2].get<int>()) << file << " frame " << k;
            EXPECT_EQ(g.size(), f.nodes);
            EXPECT_EQ(g.edges().size(), f.edges);
        }
    }
}

TEST(Snapshot, DotIsDeterministic) {
    auto run = load_run_history(golden("tiny_run.json"), false);
    auto dot = to_dot(snapshot(run, 3));
    EXPECT_EQ(dot, to_dot(snapshot(run, 3)));
    EXPECT_NE(dot.find("digraph"), std::string::npos);
    EXPECT_NE(dot.find("k-nearest-neighbors"), std::string::npos);
}

// ------------------------------------------------------------------ conditional parallel coordinates

namespace {

RunHistory cpc_run() {
    SearchSpace space({
        cat_hp("classifier", {"decision-tree", "k-nearest-neighbors"}),
        num_hp("dt:max_depth", 0, 10, 3, HpKind::integer, Condition{"classifier", std::string("decision-tree")}),
        num_hp("knn:n_neighbors", 1, 15, 5, HpKind::integer, Condition{"classifier", std::string("k-nearest-neighbors")}),
        cat_hp("knn:weights", {"uniform", "distance"}, Condition{"classifier", std::string("k-nearest-neighbors")}),
        num_hp("knn:p", 1, 2, 2, HpKind::integer, Condition{"classifier", std::string("k-nearest-neighbors")}),
    });
    std::vector<Candidate> cands{
        candidate("c1", 1, chain({"mean-imputer", "standard-scaler", "decision-tree"}, {"", "", "dt:"}),
                  {{"classifier", std::string("decision-tree")}, {"dt:max_depth", 7.0}}, 0.7),
        candidate("c2", 2, chain({"mean-imputer", "standard-scaler", "k-nearest-neighbors"}, {"", "", "knn:"}),
                  {{"classifier", std::string("k-nearest-neighbors")}, {"knn:n_neighbors", 3.0}, {"knn:weights", std::string("distance")}, {"knn:p", 1.0}}, 0.8),
        candidate("c3", 3, chain({"mean-imputer", "k-nearest-neighbors"}, {"", "knn:"}),
                  {{"classifier", std::string("k-nearest-neighbors")}, {"knn:n_neighbors", 9.0}, {"knn:weights", std::string("uniform")}, {"knn:p", 2.0}}, 0.6),
    };
    return make_run(space, cands);
}

const Coordinate& coord(const CpcModel& m, const std::string& cid, const std::string& axis) {
    const auto idx = m.axes.index_of(axis);
    for (const auto& line : m.polylines)
        if (line.candidate_id == cid)
            for (const auto& c : line.coordinates)
                if (c.axis == idx) return c;
    throw std::runtime_error("no coordinate");
}

std::string alg_axis_of(const CpcModel& m, const std::string& primitive) {
    for (const auto& a : m.axes.axes)
        if (a.kind == AxisKind::algorithm && a.label == primitive) return a.id;
    return "";
}

}  // namespace

TEST(Cpc, LinearGraphHasOneAxisPerStep) {
    auto run = load_run_history(golden("fixed_run.json"), false);
    auto model = build_cpc(run, snapshot(run, 1e9));
    std::size_t steps = 0;
    for (auto r : model.axes.roots)
        if (model.axes.axes[r].kind == AxisKind::step) ++steps;
    EXPECT_EQ(steps, 3u);
    for (int layer = 0; layer < 3; ++layer) EXPECT_EQ(model.axes.lane_count(layer), 1u);
    for (const auto& line : model.polylines) EXPECT_EQ(line.present_count(), line.coordinates.size());
}

TEST(Cpc, ParallelSplitGivesTwoLanes) {
    PipelineGraph branched({{"imp", "mean-imputer", ""}, {"enc", "one-hot-encoder", ""}, {"sc", "standard-scaler", ""}, {"clf", "decision-tree", ""}},
                           {{"imp", "enc", std::vector<std::string>{"color"}},
                            {"imp", "sc", std::vector<std::string>{"x1"}},
                            {"enc", "clf", std::nullopt},
                            {"sc", "clf", std::nullopt}});
    auto run = make_run(SearchSpace({num_hp("a", 0, 1, 0)}), {candidate("c1", 1, branched)});
    auto model = build_cpc(run, snapshot(run, 1e9));
    EXPECT_EQ(model.axes.lane_count(1), 2u);
    EXPECT_EQ(model.axes.lane_count(0), 1u);
}

TEST(Cpc, AlgorithmExpandsToItsHyperparameters) {
    auto run = cpc_run();
    auto model = build_cpc(run, snapshot(run, 1e9));
    // the kNN node at layer 2 houses n_neighbors, weights and p
    const auto& knn = model.axes.axes[model.axes.index_of(alg_axis_of(model, "k-nearest-neighbors"))];
    EXPECT_EQ(knn.children.size(), 3u);
}

TEST(Cpc, MissingStepsAndNormalizedValues) {
    auto run = cpc_run();
    auto model = build_cpc(run, snapshot(run, 1e9));
    // c3 is imputer -> kNN, so it stops at layer 1 and the layer-2 step is MISSING for it
    EXPECT_FALSE(coord(model, "c1", "step:1").missing());
    EXPECT_TRUE(coord(model, "c3", "step:2").missing());
    const auto dt_axis = "hp:" + std::to_string(model.axes.axes[model.axes.index_of(alg_axis_of(model, "decision-tree"))].merged_node) + ":dt:max_depth";
    EXPECT_DOUBLE_EQ(coord(model, "c1", dt_axis).normalized, 0.7);
    EXPECT_TRUE(coord(model, "c2", dt_axis).missing());
    EXPECT_TRUE(coord(model, "c3", dt_axis).missing());
}

TEST(Cpc, BrushSemantics) {
    auto run = cpc_run();
    auto model = build_cpc(run, snapshot(run, 1e9));
    EXPECT_EQ(brush(model, {}), (std::set<std::string>{"c1", "c2", "c3"}));

    const auto clf_axis = "hp:global:classifier";
    auto knn = brush(model, {{clf_axis, CategoryPredicate{"k-nearest-neighbors"}}});
    std::set<std::string> direct;
    for (const auto& c : run.candidates)
        if (as_string(c.config.at("classifier")) == "k-nearest-neighbors") direct.insert(c.id);
    EXPECT_EQ(knn, direct);

    // conjunction = intersection of single brushes
    std::string step0 = "step:0";
    auto a = brush(model, {{clf_axis, CategoryPredicate{"k-nearest-neighbors"}}});
    auto b = brush(model, {{step0, CategoryPredicate{"mean-imputer"}}});
    auto both = brush(model, {{clf_axis, CategoryPredicate{"k-nearest-neighbors"}}, {step0, CategoryPredicate{"mean-imputer"}}});
    std::set<std::string> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.begin()));
    EXPECT_EQ(both, inter);
}

TEST(Sampling, UniformValuesFillBinsEvenly) {
    SearchSpace space({num_hp("x", 0, 10, 0), cat_hp("mode", {"on", "off"}),
                       num_hp("never", 0, 1, 0, HpKind::continuous, Condition{"mode", std::string("off")})});
    std::vector<Candidate> cands;
    for (int i = 0; i < 10; ++i) cands.push_back(candidate("c" + std::to_string(i), i, chain({"A"}), {{"x", static_cast<double>(i)}}));
    auto run = make_run(space, cands);
    auto s = sampling_history(run, "x", 5);
    EXPECT_EQ(s.points.size(), 10u);
    EXPECT_EQ(s.counts, (std::vector<std::size_t>{2, 2, 2, 2, 2}));
    auto empty = sampling_history(run, "never", 5);
    EXPECT_TRUE(empty.points.empty());
    EXPECT_TRUE(empty.counts.empty());
}

TEST(Sampling, GridSearchShowsDistinctValues) {
    SearchSpace space({num_hp("lr", 0, 1, 0.1)});
    std::vector<Candidate> cands;
    for (int i = 0; i < 9; ++i) cands.push_back(candidate("c" + std::to_string(i), i, chain({"A"}), {{"lr", 0.1 * (1 + i % 3)}}, 0.1 * i));
    auto run = make_run(space, cands);
    auto s = sampling_history(run, "lr");
    std::set<double> distinct;
    for (const auto& p : s.points) {
        distinct.insert(as_number(p.value));
        EXPECT_EQ(*p.performance, *run.candidate(p.candidate_id).validation_performance);
    }
    EXPECT_EQ(distinct.size(), 3u);
}

// ------------------------------------------------------------------ coverage

TEST(Coverage, BoundaryCandidates) {
    EXPECT_EQ(boundary_candidates(SearchSpace({num_hp("a", 0, 1, 0), num_hp("b", 0, 1, 0)})).configs.size(), 4u);
    std::vector<Hyperparameter> many;
    for (int i = 0; i < 11; ++i) many.push_back(num_hp("h" + std::to_string(i), 0, 1, 0));
    auto skipped = boundary_candidates(SearchSpace(many));
    EXPECT_TRUE(skipped.skipped);
    EXPECT_TRUE(skipped.configs.empty());
    auto mixed = boundary_candidates(SearchSpace({cat_hp("k", {"a", "b", "c"}), num_hp("x", 0, 1, 0)}));
    ASSERT_EQ(mixed.configs.size(), 4u);
    std::set<std::string> used;
    for (const auto& c : mixed.configs) used.insert(as_string(c.at("k")));
    EXPECT_EQ(used, (std::set<std::string>{"a", "c"}));
}

TEST(Coverage, DistanceHandExample) {
    SearchSpace space({num_hp("lr", 0, 10, 0), cat_hp("kernel", {"a", "b"}, Condition{"lr", 2.0})});
    Config x{{"lr", 2.0}, {"kernel", std::string("a")}};
    Config y{{"lr", 7.0}, {"kernel", std::string("b")}};
    EXPECT_DOUBLE_EQ(distance(x, y, space), 1.0);
    EXPECT_EQ(distance(x, x, space), 0.0);
    EXPECT_EQ(distance(x, y, space), distance(y, x, space));
}

namespace {

double dist2(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST(Coverage, MdsExamples) {
    Matrix two(2, 2);
    two << 0, 2, 2, 0;
    auto p = embed(two);
    EXPECT_NEAR(std::abs(p[0].x), 1.0, 1e-9);
    EXPECT_NEAR(p[0].x + p[1].x, 0.0, 1e-9);
    EXPECT_NEAR(p[0].y, 0.0, 1e-9);

    Matrix tri(3, 3);
    tri << 0, 3, 4, 3, 0, 5, 4, 5, 0;
    auto t = embed(tri);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(dist2(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]), tri(i, j), 1e-6);
}

TEST(Coverage, SurfaceProperties) {
    std::vector<Point2> pts{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    std::vector<double> perf{0.2, 0.4, 0.6, 0.9};
    auto s = fit_surface(pts, perf);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_DOUBLE_EQ(s(pts[i]), perf[i]);
    auto hm = heatmap(s, pts);
    for (double c : hm.cells) {
        EXPECT_GE(c, 0.2 - 1e-12);
        EXPECT_LE(c, 0.9 + 1e-12);
    }
    auto single = fit_surface({{0.3, 0.3}}, {0.7});
    EXPECT_DOUBLE_EQ(single({5, -5}), 0.7);
    auto flat = heatmap(fit_surface(pts, {0.5, 0.5, 0.5, 0.5}), pts);
    for (double c : flat.cells) EXPECT_DOUBLE_EQ(c, 0.5);
}

TEST(Coverage, LoneCandidateCell) {
    // with k = 1 the cell nearest a support point takes its value
    PerformanceSurface s({{0, 0}, {10, 10}}, {0.3, 0.8}, 1);
    EXPECT_DOUBLE_EQ(s({0.5, 0.2}), 0.3);
    EXPECT_DOUBLE_EQ(s({9.0, 9.5}), 0.8);
}

TEST(Coverage, TimelapseFrames) {
    auto run = load_run_history(golden("template_run.json"), false);
    CoverageModel model(run);
    auto none = model.frame(0.0);
    EXPECT_FALSE(none.heatmap);
    for (const auto& p : none.points) EXPECT_TRUE(p.boundary);
    auto all = model.frame(std::numeric_limits<double>::infinity());
    std::size_t scored = 0;
    for (const auto& p : all.points) scored += !p.boundary;
    EXPECT_EQ(scored, run.candidates.size());

    auto f3 = model.frame(3), f6 = model.frame(6);
    std::map<std::string, Point2> later;
    for (const auto& p : f6.points) later[p.id] = p.position;
    for (const auto& p : f3.points) {
        ASSERT_TRUE(later.count(p.id)) << p.id;
        EXPECT_EQ(later[p.id].x, p.position.x);
        EXPECT_EQ(later[p.id].y, p.position.y);
    }
    EXPECT_LT(f3.points.size(), f6.points.size());
}

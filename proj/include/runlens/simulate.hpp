#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "models/pipeline.hpp"
#include "run_history.hpp"

namespace runlens {

struct SimulationOptions {
    std::string run_id = "simulated-random-search";
    std::string dataset_file = "simulated.csv";
    std::size_t candidates = 30;
    std::size_t rows = 500;
    std::uint64_t seed = 7;
    /// Share of candidates reported as crashed (no validation performance).
    double crash_rate = 0.0;
    /// Share of candidates whose pipeline splits categorical and numeric columns into two lanes.
    double branch_rate = 0.3;
    bool ensemble = true;
    /// Split seed of the refits that produce the recorded performances; matching the analysis
    /// seed makes recorded and recomputed accuracies agree.
    std::uint64_t analysis_seed = 0;
};

struct SimulatedRun {
    RunHistory run;
    std::string csv;
};

namespace detail {

/// Rounds to `decimals` places, landing on the double nearest the decimal value.
inline double round_to(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

inline Hyperparameter categorical_hp(std::string name, std::vector<std::string> choices, std::optional<Condition> cond = {}) {
    Hyperparameter hp;
    hp.name = std::move(name);
    hp.kind = HpKind::categorical;
    hp.default_value = choices.front();
    hp.choices = std::move(choices);
    hp.condition = std::move(cond);
    return hp;
}

inline Hyperparameter numeric_hp(std::string name, HpKind kind, double lo, double hi, double def, bool log_scale,
                                 std::optional<Condition> cond) {
    Hyperparameter hp;
    hp.name = std::move(name);
    hp.kind = kind;
    hp.lower = lo;
    hp.upper = hi;
    hp.default_value = def;
    hp.log_scale = log_scale;
    hp.condition = std::move(cond);
    return hp;
}

inline SearchSpace simulation_space() {
    auto when = [](const char* parent, const char* v) { return Condition{parent, std::string(v)}; };
    return SearchSpace({
        categorical_hp("imputer", {"mean-imputer", "most-frequent-imputer"}),
        categorical_hp("scaler", {"standard-scaler", "min-max-scaler", "pca"}),
        categorical_hp("classifier", {"decision-tree", "random-forest", "k-nearest-neighbors", "logistic-regression", "gaussian-naive-bayes"}),
        numeric_hp("pca:n_components", HpKind::integer, 1, 4, 2, false, when("scaler", "pca")),
        numeric_hp("dt:max_depth", HpKind::integer, 1, 10, 3, false, when("classifier", "decision-tree")),
        numeric_hp("dt:min_samples_leaf", HpKind::integer, 1, 20, 1, false, when("classifier", "decision-tree")),
        numeric_hp("rf:n_estimators", HpKind::integer, 5, 30, 10, false, when("classifier", "random-forest")),
        numeric_hp("rf:max_depth", HpKind::integer, 2, 10, 5, false, when("classifier", "random-forest")),
        numeric_hp("knn:n_neighbors", HpKind::integer, 1, 15, 5, false, when("classifier", "k-nearest-neighbors")),
        categorical_hp("knn:weights", {"uniform", "distance"}, when("classifier", "k-nearest-neighbors")),
        numeric_hp("lr:C", HpKind::continuous, 0.01, 100.0, 1.0, true, when("classifier", "logistic-regression")),
        numeric_hp("nb:var_smoothing", HpKind::continuous, 1e-10, 1e-6, 1e-9, true, when("classifier", "gaussian-naive-bayes")),
    });
}

/// Synthetic binary task: four numeric features (x3 partly missing) and one categorical.
inline std::string simulation_csv(std::size_t rows, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 1));
    const std::vector<std::string> colors{"blue", "green", "red"};
    std::string out = "x1,x2,x3,x4,color,label\n";
    for (std::size_t r = 0; r < rows; ++r) {
        double x[4];
        for (double& v : x) v = round_to(standard_normal(rng), 4);
        const auto color = uniform_index(rng, colors.size());
        const bool missing = uniform01(rng) < 0.05;
        const double logit = 1.5 * x[0] - x[1] + 0.4 * x[2] + (color == 2 ? 0.8 : 0.0) + 0.5 * standard_normal(rng);
        out += format_number(x[0]) + "," + format_number(x[1]) + "," + (missing ? "" : format_number(x[2])) + "," +
               format_number(x[3]) + "," + colors[color] + "," + (logit > 0 ? "yes" : "no") + "\n";
    }
    return out;
}

inline PipelineGraph simulation_pipeline(const Config& cfg, bool branched) {
    const auto& scaler = as_string(cfg.at("scaler"));
    const auto& clf = as_string(cfg.at("classifier"));
    static const std::map<std::string, std::string> clf_prefix{{"decision-tree", "dt:"},
                                                               {"random-forest", "rf:"},
                                                               {"k-nearest-neighbors", "knn:"},
                                                               {"logistic-regression", "lr:"},
                                                               {"gaussian-naive-bayes", "nb:"}};
    std::vector<PipelineNode> nodes{{"imputer", as_string(cfg.at("imputer")), "imputer:"},
                                    {"encoder", "one-hot-encoder", "encoder:"},
                                    {"scaler", scaler, scaler == "pca" ? "pca:" : "scaler:"},
                                    {"classifier", clf, clf_prefix.at(clf)}};
    std::vector<PipelineEdge> edges;
    if (branched) {
        edges = {{"imputer", "encoder", std::vector<std::string>{"color"}},
                 {"imputer", "scaler", std::vector<std::string>{"x1", "x2", "x3", "x4"}},
                 {"encoder", "classifier", std::nullopt},
                 {"scaler", "classifier", std::nullopt}};
    } else {
        edges = {{"imputer", "encoder", std::nullopt}, {"encoder", "scaler", std::nullopt}, {"scaler", "classifier", std::nullopt}};
    }
    return PipelineGraph(std::move(nodes), std::move(edges));
}

inline Value sample_value(const Hyperparameter& hp, Rng& rng) {
    if (!hp.numeric()) return hp.choices[uniform_index(rng, hp.choices.size())];
    const double u = uniform01(rng);
    if (hp.kind == HpKind::integer) return std::min(hp.upper, std::floor(hp.lower + u * (hp.upper - hp.lower + 1.0)));
    if (hp.log_scale) return std::exp(std::log(hp.lower) + u * (std::log(hp.upper) - std::log(hp.lower)));
    return hp.lower + u * (hp.upper - hp.lower);
}

}  // namespace detail

/// Scripted random search over 4-step pipelines. Every candidate is really fitted, so recorded
/// performances are the refit validation accuracies; durations are synthetic and seeded.
inline SimulatedRun simulate_random_search(const SimulationOptions& opt) {
    SimulatedRun out;
    out.csv = detail::simulation_csv(opt.rows, opt.seed);
    RunHistory& run = out.run;
    run.run_id = opt.run_id;
    run.search_spaces = {detail::simulation_space()};
    run.merged_space = merge_search_spaces(run.search_spaces);
    run.dataset_ref = {opt.dataset_file, "label",
                       {{"color", ColumnKind::categorical, std::vector<std::string>{"blue", "green", "red"}}},
                       std::vector<std::string>{"no", "yes"}};
    run.dataset = dataset_from_csv(out.csv, "label", run.dataset_ref.columns, run.dataset_ref.class_labels);

    Rng rng(derive_seed(opt.seed, 2));
    double clock = 0.0;
    for (std::size_t i = 0; i < opt.candidates; ++i) {
        Candidate c;
        c.id = "c" + std::to_string(i + 1);
        for (const auto& hp : run.merged_space.hyperparameters()) {
            if (!hp.condition) c.config[hp.name] = detail::sample_value(hp, rng);
        }
        for (const auto& hp : run.merged_space.hyperparameters())
            if (hp.condition && run.merged_space.is_active(hp.name, c.config)) c.config[hp.name] = detail::sample_value(hp, rng);
        const bool branched = uniform01(rng) < opt.branch_rate;
        c.pipeline = detail::simulation_pipeline(c.config, branched);
        c.fit_duration = detail::round_to(0.05 + 1.95 * uniform01(rng), 3);
        c.predict_duration = detail::round_to(0.001 + 0.02 * uniform01(rng), 4);
        clock = detail::round_to(clock + c.fit_duration + c.predict_duration, 3);
        c.timestamp = clock;
        const bool crashed = uniform01(rng) < opt.crash_rate;
        if (!crashed) {
            FittedPipeline fp(c, *run.dataset, opt.analysis_seed);
            const auto r = report(fp, *run.dataset);
            c.train_performance = r.train_accuracy;
            c.validation_performance = r.validation_accuracy;
        }
        run.candidates.push_back(std::move(c));
    }

    if (opt.ensemble) {
        std::vector<const Candidate*> scored;
        for (const auto& c : run.candidates)
            if (c.scored()) scored.push_back(&c);
        std::stable_sort(scored.begin(), scored.end(), [](const Candidate* a, const Candidate* b) {
            return *a->validation_performance > *b->validation_performance;
        });
        const std::vector<double> weights{0.5, 0.3, 0.2};
        if (scored.size() >= weights.size()) {
            EnsembleSpec spec;
            for (std::size_t k = 0; k < weights.size(); ++k) spec.members.push_back({scored[k]->id, weights[k]});
            run.ensemble = spec;
        }
    }
    return out;
}

/// Writes `<dir>/<run file>` and the dataset CSV next to it.
inline void write_simulation(const SimulatedRun& sim, const std::string& dir, const std::string& run_file) {
    std::filesystem::create_directories(dir);
    write_text_file((std::filesystem::path(dir) / sim.run.dataset_ref.path).string(), sim.csv);
    write_text_file((std::filesystem::path(dir) / run_file).string(), to_json(sim.run).dump(2) + "\n");
}

}  // namespace runlens

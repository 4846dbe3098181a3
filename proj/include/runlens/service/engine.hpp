#pragma once

#include <filesystem>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../coverage.hpp"
#include "../cpc.hpp"
#include "../ensemble.hpp"
#include "../explain/effects.hpp"
#include "../explain/fanova.hpp"
#include "../explain/lime.hpp"
#include "../explain/surrogate.hpp"
#include "../models/pipeline.hpp"
#include "../structure_graph.hpp"
#include "cache.hpp"

namespace runlens {

struct EngineConfig {
    std::uint64_t seed = 0;
    std::size_t cache_bytes = std::size_t{64} << 20;
    /// Explainer and surface computations run on at most this many rows.
    std::size_t row_cap = 5000;
};

struct AnalysisRequest {
    std::string run_id;
    std::string candidate_id;
    std::string op;
    std::map<std::string, std::string> params;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    bool cache_hit = false;
};

struct ExportFile {
    std::string filename;
    std::string content_type;
    std::string content;
};

inline int http_status(ErrorKind k) {
    switch (k) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::validation:
        case ErrorKind::contract:
        case ErrorKind::load: return 400;
        case ErrorKind::capability: return 409;
        case ErrorKind::unsupported_primitive:
        case ErrorKind::unevaluable:
        case ErrorKind::insufficient_data:
        case ErrorKind::degenerate:
        case ErrorKind::merge: return 422;
    }
    return 500;
}

inline std::string error_body(ErrorKind kind, const std::string& message, const json& extra = json::object()) {
    json e{{"kind", std::string(to_string(kind))}, {"message", message}};
    for (auto it = extra.begin(); it != extra.end(); ++it) e[it.key()] = it.value();
    return json{{"error", e}}.dump();
}

namespace detail {

enum class ParamType { integer, number, text };

struct ParamSpec {
    const char* name;
    ParamType type;
    const char* fallback;
};

struct OpSpec {
    bool needs_run;
    bool needs_candidate;
    std::vector<ParamSpec> params;
};

inline const std::map<std::string, OpSpec>& operations() {
    using P = ParamType;
    static const std::map<std::string, OpSpec> ops{
        {"runs", {false, false, {}}},
        {"overview", {true, false, {}}},
        {"leaderboard", {true, false, {}}},
        {"report", {true, true, {}}},
        {"surrogate", {true, true, {{"node", P::text, "source"}, {"max_leaf_nodes", P::integer, "8"}}}},
        {"local-surrogate",
         {true, true, {{"node", P::text, "source"}, {"row", P::integer, "0"}, {"n_samples", P::integer, "1000"}, {"target_class", P::integer, "-1"}}}},
        {"effects",
         {true, true,
          {{"node", P::text, "source"}, {"n_repeats", P::integer, "5"}, {"grid_size", P::integer, "20"}, {"target_class", P::integer, "0"},
           {"max_ice_rows", P::integer, "50"}, {"format", P::text, "json"}}}},
        {"config", {true, true, {}}},
        {"intermediate",
         {true, true, {{"node", P::text, "source"}, {"offset", P::integer, "0"}, {"limit", P::integer, "100"}, {"format", P::text, "json"}}}},
        {"structure-graph", {true, false, {{"at", P::number, ""}, {"format", P::text, "json"}}}},
        {"cpc", {true, false, {{"at", P::number, ""}, {"brush", P::text, ""}}}},
        {"sampling", {true, false, {{"hp", P::text, ""}, {"bins", P::integer, "20"}}}},
        {"coverage", {true, false, {{"at", P::number, ""}, {"format", P::text, "json"}}}},
        {"hp-importance", {true, false, {{"structure_of", P::text, ""}, {"n_trees", P::integer, "32"}, {"format", P::text, "json"}}}},
        {"ensemble/members", {true, false, {}}},
        {"ensemble/predictions", {true, false, {{"split", P::text, "validation"}, {"offset", P::integer, "0"}, {"limit", P::integer, "100"}}}},
        {"ensemble/surfaces", {true, false, {{"resolution", P::integer, "64"}}}},
    };
    return ops;
}

/// Fills defaults and rewrites numbers canonically, so equivalent requests share a cache key.
inline std::map<std::string, std::string> canonical_params(const OpSpec& spec, const std::map<std::string, std::string>& raw) {
    std::map<std::string, std::string> out;
    for (const auto& p : spec.params) {
        auto it = raw.find(p.name);
        std::string v = it == raw.end() ? p.fallback : it->second;
        if (p.type != ParamType::text && !v.empty()) {
            auto d = parse_double(v);
            if (!d || !std::isfinite(*d)) throw Error(ErrorKind::validation, std::string("parameter '") + p.name + "' must be a number");
            if (p.type == ParamType::integer && *d != std::floor(*d))
                throw Error(ErrorKind::validation, std::string("parameter '") + p.name + "' must be an integer");
            v = format_number(*d);
        }
        out[p.name] = v;
    }
    return out;
}

inline long param_int(const std::map<std::string, std::string>& p, const std::string& k) { return std::stol(p.at(k)); }

inline double param_time(const std::map<std::string, std::string>& p) {
    const auto& v = p.at("at");
    return v.empty() ? std::numeric_limits<double>::infinity() : *parse_double(v);
}

}  // namespace detail

/// Loaded run plus lazily built, shared analysis state.
class RunState {
public:
    RunState(RunHistory run, std::string path, const EngineConfig& cfg)
        : run_(std::move(run)), path_(std::move(path)), cfg_(cfg), snapshots_(run_) {}

    const RunHistory& run() const { return run_; }
    const std::string& path() const { return path_; }
    SnapshotCache& snapshots() { return snapshots_; }

    const CoverageModel& coverage() {
        std::call_once(coverage_once_, [&] { coverage_.emplace(run_); });
        return *coverage_;
    }

    /// Refit once per candidate; every caller shares the immutable result (or its failure).
    std::shared_ptr<const FittedPipeline> fitted(const std::string& candidate_id) {
        std::shared_future<std::shared_ptr<const FittedPipeline>> fut;
        std::promise<std::shared_ptr<const FittedPipeline>> promise;
        bool owner = false;
        {
            std::lock_guard lock(mutex_);
            auto it = fitted_.find(candidate_id);
            if (it == fitted_.end()) {
                fut = promise.get_future().share();
                fitted_.emplace(candidate_id, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                promise.set_value(std::make_shared<const FittedPipeline>(run_.candidate(candidate_id), run_.data(), cfg_.seed));
            } catch (...) {
                promise.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

    /// Seeded, class-stratified row sample used by the explainers.
    std::vector<std::size_t> capped(const std::vector<std::size_t>& rows) const {
        const auto& data = run_.data();
        std::vector<int> labels;
        for (auto r : rows) labels.push_back(data.labels[r]);
        std::vector<std::size_t> out;
        for (auto i : stratified_sample(labels, data.n_classes(), cfg_.row_cap, cfg_.seed)) out.push_back(rows[i]);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::size_t> all_rows() const {
        std::vector<std::size_t> r(run_.data().rows());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
        return r;
    }

    Split split() const {
        const auto& d = run_.data();
        return stratified_split(d.labels, d.n_classes(), cfg_.seed, validation_fraction);
    }

private:
    RunHistory run_;
    std::string path_;
    EngineConfig cfg_;
    SnapshotCache snapshots_;
    std::once_flag coverage_once_;
    std::optional<CoverageModel> coverage_;
    std::mutex mutex_;
    std::map<std::string, std::shared_future<std::shared_ptr<const FittedPipeline>>> fitted_;
};

/// All analyses as pure functions of (run file, parameters, seed), serialized once and cached.
class Engine {
public:
    explicit Engine(EngineConfig cfg = {}) : cfg_(cfg), cache_(cfg.cache_bytes) {}

    const EngineConfig& config() const { return cfg_; }
    AnalysisCache& cache() { return cache_; }

    const std::string& add_run(RunHistory run, const std::string& path = "") {
        const auto id = run.run_id;
        if (runs_.count(id)) throw Error(ErrorKind::validation, "duplicate run id '" + id + "'");
        auto [it, _] = runs_.emplace(id, std::make_unique<RunState>(std::move(run), path, cfg_));
        return it->first;
    }

    /// A run file, or every *.json file of a directory.
    std::vector<std::string> load_path(const std::string& path) {
        namespace fs = std::filesystem;
        std::vector<std::string> ids;
        std::error_code ec;
        if (fs::is_directory(path, ec)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path))
                if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) ids.push_back(add_run(load_run_history(f.string()), f.string()));
        } else {
            if (!fs::exists(path, ec)) throw Error(ErrorKind::load, "run path '" + path + "' does not exist");
            ids.push_back(add_run(load_run_history(path), path));
        }
        return ids;
    }

    std::vector<std::string> run_ids() const {
        std::vector<std::string> out;
        for (const auto& [id, _] : runs_) out.push_back(id);
        return out;
    }

    RunState& state(const std::string& run_id) {
        auto it = runs_.find(run_id);
        if (it == runs_.end()) throw Error(ErrorKind::not_found, "unknown run '" + run_id + "'");
        return *it->second;
    }

    /// Result body of one analysis; throws `Error` on failure.
    std::string analyze(const AnalysisRequest& req, bool* cache_hit = nullptr) {
        const auto& ops = detail::operations();
        auto op = ops.find(req.op);
        if (op == ops.end()) throw Error(ErrorKind::not_found, "unknown analysis '" + req.op + "'");
        const auto params = detail::canonical_params(op->second, req.params);
        RunState* rs = nullptr;
        if (op->second.needs_run) rs = &state(req.run_id);
        if (op->second.needs_candidate) rs->run().candidate(req.candidate_id);
        const auto key = cache_key(req.run_id, req.candidate_id, req.op, params);
        return *cache_.get_or_compute(key, [&] { return compute(req.op, rs, req.candidate_id, params); }, cache_hit);
    }

    Response handle(const AnalysisRequest& req) {
        Response r;
        try {
            r.body = analyze(req, &r.cache_hit);
            if (is_csv(req)) r.content_type = "text/csv";
            else if (req.op == "structure-graph" && req.params.count("format") && req.params.at("format") == "dot")
                r.content_type = "text/vnd.graphviz";
        } catch (const Error& e) {
            r.status = http_status(e.kind());
            json extra = json::object();
            if (e.kind() == ErrorKind::not_found && !req.run_id.empty() && !runs_.count(req.run_id)) extra["run_id"] = req.run_id;
            r.body = error_body(e.kind(), e.what(), extra);
        } catch (const std::exception& e) {
            r.status = 500;
            r.body = error_body(ErrorKind::contract, e.what());
        }
        return r;
    }

    /// Portable artifact file; request fields: run_id, artifact, candidate_id, node, max_leaf_nodes, at.
    ExportFile export_artifact(const json& request) {
        const auto get = [&](const char* k, const std::string& fallback = "") {
            if (!request.contains(k) || request.at(k).is_null()) return fallback;
            const auto& v = request.at(k);
            return v.is_string() ? v.get<std::string>() : v.dump();
        };
        const auto run_id = get("run_id");
        const auto artifact = get("artifact");
        const auto cid = get("candidate_id");
        auto& rs = state(run_id);
        const auto base = sanitize(run_id) + (cid.empty() ? "" : "_" + sanitize(cid));
        if (artifact == "intermediate-dataset") {
            const auto node = get("node", std::string(source_node_id));
            return {base + "_" + sanitize(node) + ".csv", "text/csv",
                    analyze({run_id, cid, "intermediate", {{"node", node}, {"format", "csv"}}})};
        }
        if (artifact == "surrogate-tree") {
            const auto node = get("node", std::string(source_node_id));
            return {base + "_surrogate.json", "application/json",
                    analyze({run_id, cid, "surrogate", {{"node", node}, {"max_leaf_nodes", get("max_leaf_nodes", "8")}}})};
        }
        if (artifact == "config") {
            return {base + "_config.json", "application/json", config_to_json(rs.run().candidate(cid).config).dump(2) + "\n"};
        }
        if (artifact == "importance-table") {
            return {base + "_importance.csv", "text/csv", analyze({run_id, "", "hp-importance", {{"format", "csv"}}})};
        }
        if (artifact == "coverage-embedding") {
            std::map<std::string, std::string> p{{"format", "csv"}};
            if (auto at = get("at"); !at.empty()) p["at"] = at;
            return {base + "_coverage.csv", "text/csv", analyze({run_id, "", "coverage", p})};
        }
        throw Error(ErrorKind::validation, "unknown artifact '" + artifact + "'");
    }

private:
    static bool is_csv(const AnalysisRequest& req) {
        auto it = req.params.find("format");
        return it != req.params.end() && it->second == "csv";
    }

    static std::string sanitize(const std::string& s) {
        std::string out;
        for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_';
        return out;
    }

    std::string compute(const std::string& op, RunState* rs, const std::string& cid, const std::map<std::string, std::string>& p) {
        if (op == "runs") return runs_json().dump();
        const auto& run = rs->run();
        if (op == "overview") return overview(run).dump();
        if (op == "leaderboard") return leaderboard(run).dump();
        if (op == "config") return candidate_config(run.candidate(cid)).dump();
        if (op == "report") return candidate_report(*rs, cid).dump();
        if (op == "surrogate") return surrogate(*rs, cid, p).dump();
        if (op == "local-surrogate") return local(*rs, cid, p).dump();
        if (op == "effects") return effects(*rs, cid, p);
        if (op == "intermediate") return intermediate(*rs, cid, p);
        if (op == "structure-graph") return structure(*rs, p);
        if (op == "cpc") return cpc(*rs, p).dump();
        if (op == "sampling") {
            if (p.at("hp").empty()) throw Error(ErrorKind::validation, "sampling needs a hyperparameter name");
            if (!run.merged_space.contains(p.at("hp"))) throw Error(ErrorKind::not_found, "unknown hyperparameter '" + p.at("hp") + "'");
            return to_json(sampling_history(run, p.at("hp"), static_cast<std::size_t>(std::max(1L, detail::param_int(p, "bins"))))).dump();
        }
        if (op == "coverage") {
            auto frame = rs->coverage().frame(detail::param_time(p));
            if (p.at("format") == "csv") return embedding_to_csv(frame);
            json j = to_json(frame);
            j["at"] = p.at("at").empty() ? json(nullptr) : json(frame.at);
            return j.dump();
        }
        if (op == "hp-importance") {
            FanovaOptions opt;
            opt.seed = cfg_.seed;
            opt.n_trees = static_cast<std::size_t>(std::max(1L, detail::param_int(p, "n_trees")));
            if (!p.at("structure_of").empty()) opt.structure_of = p.at("structure_of");
            auto table = hp_importance(run, opt);
            return p.at("format") == "csv" ? importance_to_csv(table) : to_json(table).dump();
        }
        if (op.rfind("ensemble/", 0) == 0) return ensemble(*rs, op.substr(9), p).dump();
        throw Error(ErrorKind::not_found, "unknown analysis '" + op + "'");
    }

    json runs_json() const {
        json out = json::array();
        for (const auto& [id, rs] : runs_) {
            const auto& r = rs->run();
            out.push_back({{"run_id", id},
                           {"metric", r.metric_name},
                           {"task", r.task},
                           {"candidates", r.candidates.size()},
                           {"ensemble", r.ensemble.has_value()}});
        }
        return out;
    }

    static json overview(const RunHistory& run) {
        std::size_t scored = 0;
        const Candidate* best = nullptr;
        json timeline = json::array();
        std::set<std::string> structures;
        for (const auto* c : run.ordered_candidates()) {
            structures.insert(to_json(c->pipeline).dump());
            timeline.push_back({{"candidate_id", c->id},
                                {"timestamp", c->timestamp},
                                {"validation_performance", c->validation_performance ? json(*c->validation_performance) : json(nullptr)},
                                {"train_performance", c->train_performance ? json(*c->train_performance) : json(nullptr)}});
            if (!c->scored()) continue;
            ++scored;
            if (!best || *c->validation_performance > *best->validation_performance) best = c;
        }
        json data = nullptr;
        if (run.dataset) {
            std::vector<std::size_t> counts(run.dataset->n_classes(), 0);
            for (int l : run.dataset->labels) counts[static_cast<std::size_t>(l)]++;
            data = {{"path", run.dataset_ref.path},
                    {"target", run.dataset->target},
                    {"rows", run.dataset->rows()},
                    {"features", run.dataset->features.names()},
                    {"class_labels", run.dataset->class_labels},
                    {"class_counts", counts}};
        }
        const auto ordered = run.ordered_candidates();
        return {{"run_id", run.run_id},
                {"metric", run.metric_name},
                {"task", run.task},
                {"candidates", run.candidates.size()},
                {"scored", scored},
                {"failed", run.candidates.size() - scored},
                {"best", best ? json{{"candidate_id", best->id}, {"validation_performance", *best->validation_performance}} : json(nullptr)},
                {"first_timestamp", ordered.empty() ? json(nullptr) : json(ordered.front()->timestamp)},
                {"last_timestamp", ordered.empty() ? json(nullptr) : json(ordered.back()->timestamp)},
                {"distinct_structures", structures.size()},
                {"hyperparameters", run.merged_space.size()},
                {"ensemble", run.ensemble.has_value()},
                {"dataset", data},
                {"performance_over_time", timeline}};
    }

    /// Scored candidates by validation performance (descending), then unscored ones; ties by id.
    static json leaderboard(const RunHistory& run) {
        std::vector<const Candidate*> rows;
        for (const auto& c : run.candidates) rows.push_back(&c);
        std::stable_sort(rows.begin(), rows.end(), [](const Candidate* a, const Candidate* b) {
            if (a->scored() != b->scored()) return a->scored();
            if (a->scored() && *a->validation_performance != *b->validation_performance)
                return *a->validation_performance > *b->validation_performance;
            return a->id < b->id;
        });
        json out = json::array();
        std::size_t rank = 0;
        for (const auto* c : rows) {
            json prims = json::array();
            bool supported = true;
            for (const auto& n : c->pipeline.nodes()) {
                prims.push_back(n.primitive);
                supported = supported && models::is_supported_primitive(n.primitive);
            }
            out.push_back({{"rank", ++rank},
                           {"candidate_id", c->id},
                           {"validation_performance", c->validation_performance ? json(*c->validation_performance) : json(nullptr)},
                           {"train_performance", c->train_performance ? json(*c->train_performance) : json(nullptr)},
                           {"fit_duration", c->fit_duration},
                           {"predict_duration", c->predict_duration},
                           {"timestamp", c->timestamp},
                           {"primitives", prims},
                           {"supported", supported}});
        }
        return {{"run_id", run.run_id}, {"metric", run.metric_name}, {"rows", out}};
    }

    static json candidate_config(const Candidate& c) {
        return {{"candidate_id", c.id}, {"config", config_to_json(c.config)}, {"pipeline", to_json(c.pipeline)}};
    }

    static json candidate_report(RunState& rs, const std::string& cid) {
        const auto fp = rs.fitted(cid);
        const auto& c = rs.run().candidate(cid);
        json j = to_json(report(*fp, rs.run().data()));
        j["candidate_id"] = cid;
        j["recorded"] = {{"validation_performance", c.validation_performance ? json(*c.validation_performance) : json(nullptr)},
                         {"train_performance", c.train_performance ? json(*c.train_performance) : json(nullptr)}};
        return j;
    }

    /// Oracle and data at a pipeline node: the full pipeline on raw rows for the source,
    /// otherwise the downstream part of the pipeline on the node's output.
    struct NodeView {
        std::shared_ptr<const FittedPipeline> pipeline;
        std::unique_ptr<NodeOracle> node_oracle;
        const PredictionOracle* oracle = nullptr;
        Table data;
        std::vector<int> labels;
    };

    static NodeView node_view(RunState& rs, const std::string& cid, const std::string& node, const std::vector<std::size_t>& rows) {
        NodeView v;
        v.pipeline = rs.fitted(cid);
        const Dataset subset = rs.run().data().select_rows(rows);
        v.labels = subset.labels;
        if (node == source_node_id) {
            v.oracle = v.pipeline.get();
            v.data = subset.features;
        } else {
            v.node_oracle = std::make_unique<NodeOracle>(v.pipeline, node);
            v.oracle = v.node_oracle.get();
            v.data = v.pipeline->transform_until(node, subset.features);
        }
        return v;
    }

    json surrogate(RunState& rs, const std::string& cid, const std::map<std::string, std::string>& p) {
        const auto v = node_view(rs, cid, p.at("node"), rs.capped(rs.all_rows()));
        auto s = global_surrogate(*v.oracle, v.data, static_cast<std::size_t>(std::max(0L, detail::param_int(p, "max_leaf_nodes"))),
                                  rs.run().data().class_labels);
        json j = to_json(s);
        j["candidate_id"] = cid;
        j["node"] = p.at("node");
        return j;
    }

    json local(RunState& rs, const std::string& cid, const std::map<std::string, std::string>& p) {
        const auto v = node_view(rs, cid, p.at("node"), rs.all_rows());
        LimeOptions opt;
        opt.seed = cfg_.seed;
        opt.n_samples = static_cast<std::size_t>(std::max(0L, detail::param_int(p, "n_samples")));
        if (auto t = detail::param_int(p, "target_class"); t >= 0) opt.target_class = static_cast<int>(t);
        const auto row = detail::param_int(p, "row");
        if (row < 0) throw Error(ErrorKind::not_found, "row " + std::to_string(row) + " does not exist");
        json j = to_json(local_surrogate(*v.oracle, v.data, static_cast<std::size_t>(row), opt));
        j["candidate_id"] = cid;
        j["node"] = p.at("node");
        j["class_labels"] = rs.run().data().class_labels;
        j["label"] = rs.run().data().class_labels[static_cast<std::size_t>(v.labels[static_cast<std::size_t>(row)])];
        return j;
    }

    std::string effects(RunState& rs, const std::string& cid, const std::map<std::string, std::string>& p) {
        const auto fp = rs.fitted(cid);
        const auto v = node_view(rs, cid, p.at("node"), rs.capped(fp->split().validation));
        EffectsOptions opt;
        opt.seed = cfg_.seed;
        opt.n_repeats = static_cast<std::size_t>(std::max(1L, detail::param_int(p, "n_repeats")));
        opt.grid_size = static_cast<std::size_t>(std::max(1L, detail::param_int(p, "grid_size")));
        opt.target_class = static_cast<int>(detail::param_int(p, "target_class"));
        const auto fe = feature_effects(*v.oracle, v.data, v.labels, opt);
        if (p.at("format") == "csv") return permutation_importance_to_csv(fe.importance);
        json j = to_json(fe, static_cast<std::size_t>(std::max(0L, detail::param_int(p, "max_ice_rows"))));
        j["candidate_id"] = cid;
        j["node"] = p.at("node");
        j["class_labels"] = rs.run().data().class_labels;
        return j.dump();
    }

    std::string intermediate(RunState& rs, const std::string& cid, const std::map<std::string, std::string>& p) {
        const auto& node = p.at("node");
        const auto& data = rs.run().data();
        if (node != source_node_id) rs.run().candidate(cid).pipeline.index_of(node);
        Dataset out = node == source_node_id ? data : rs.fitted(cid)->transform_until(node, data);
        if (p.at("format") == "csv") return dataset_to_csv(out);
        const auto offset = static_cast<std::size_t>(std::max(0L, detail::param_int(p, "offset")));
        const auto limit = static_cast<std::size_t>(std::max(0L, detail::param_int(p, "limit")));
        std::vector<std::size_t> rows;
        for (std::size_t r = offset; r < std::min(out.rows(), offset + limit); ++r) rows.push_back(r);
        const Dataset page = out.select_rows(rows);
        json j = table_to_json(page.features, &page.labels, &page.class_labels, page.target);
        j["candidate_id"] = cid;
        j["node"] = node;
        j["total_rows"] = out.rows();
        j["offset"] = offset;
        return j.dump();
    }

    static std::string structure(RunState& rs, const std::map<std::string, std::string>& p) {
        const double t = detail::param_time(p);
        const auto merged = rs.snapshots().at_time(t);
        if (p.at("format") == "dot") return to_dot(merged);
        json j = to_json(merged);
        j["at"] = p.at("at").empty() ? json(nullptr) : json(t);
        return j.dump();
    }

    static json cpc(RunState& rs, const std::map<std::string, std::string>& p) {
        const double t = detail::param_time(p);
        const auto model = build_cpc(rs.run(), rs.snapshots().at_time(t));
        json j = to_json(model);
        j["at"] = p.at("at").empty() ? json(nullptr) : json(t);
        if (!p.at("brush").empty()) {
            json b;
            try {
                b = json::parse(p.at("brush"));
            } catch (const json::exception&) {
                throw Error(ErrorKind::validation, "brush must be a JSON object");
            }
            if (!b.is_object()) throw Error(ErrorKind::validation, "brush must be a JSON object");
            std::map<std::string, AxisPredicate> preds;
            for (auto it = b.begin(); it != b.end(); ++it) {
                const auto& v = it.value();
                if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
                    preds[it.key()] = RangePredicate{v[0].get<double>(), v[1].get<double>()};
                else if (v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); }))
                    preds[it.key()] = CategoryPredicate(v.begin(), v.end());
                else
                    throw Error(ErrorKind::validation, "brush on '" + it.key() + "' must be [lo, hi] or a list of categories");
            }
            j["selected"] = brush(model, preds);
        }
        return j;
    }

    static json unavailable(const std::string& reason) { return {{"available", false}, {"reason", reason}}; }

    json ensemble(RunState& rs, const std::string& what, const std::map<std::string, std::string>& p) {
        const auto& run = rs.run();
        if (!run.ensemble) return unavailable("run has no ensemble");
        const auto& data = run.data();
        std::vector<std::shared_ptr<const FittedPipeline>> fitted;
        std::vector<std::unique_ptr<PredictionOracle>> failing;
        std::vector<WeightedOracle> members;
        std::vector<std::string> errors;
        for (const auto& m : run.ensemble->members) {
            try {
                fitted.push_back(rs.fitted(m.candidate_id));
                members.push_back({m.candidate_id, fitted.back().get(), m.weight});
                errors.emplace_back();
            } catch (const Error& e) {
                const std::string msg = e.what();
                const auto kind = e.kind();
                failing.push_back(std::make_unique<FunctionOracle>(data.n_classes(), [msg, kind](const Table&) -> Matrix {
                    throw Error(kind, msg);
                }));
                members.push_back({m.candidate_id, failing.back().get(), m.weight});
                errors.push_back(msg);
            }
        }
        if (what == "surfaces") {
            const auto rows = rs.capped(rs.all_rows());
            json j = to_json(decision_surfaces(members, data.features.select_rows(rows),
                                               static_cast<std::size_t>(std::max(2L, detail::param_int(p, "resolution")))));
            j["available"] = true;
            j["class_labels"] = data.class_labels;
            return j;
        }
        const auto split = rs.split();
        const bool train = what == "predictions" && p.at("split") == "train";
        if (what == "predictions" && !train && p.at("split") != "validation")
            throw Error(ErrorKind::validation, "split must be 'train' or 'validation'");
        const auto& rows = train ? split.train : split.validation;
        const Dataset subset = data.select_rows(rows);
        const auto pred = ensemble_predict(members, subset.features);
        if (what == "members") {
            json out = json::array();
            for (std::size_t i = 0; i < members.size(); ++i) {
                const auto& c = run.candidate(members[i].name);
                out.push_back({{"candidate_id", members[i].name},
                               {"weight", members[i].weight},
                               {"effective_weight", pred.effective_weights[i]},
                               {"recorded_validation_performance", c.validation_performance ? json(*c.validation_performance) : json(nullptr)},
                               {"validation_accuracy", pred.failed[i] ? json(nullptr) : json(accuracy(subset.labels, predict_labels(pred.member_proba[i])))},
                               {"failed", pred.failed[i]},
                               {"error", errors[i].empty() ? json(nullptr) : json(errors[i])}});
            }
            return {{"available", true},
                    {"members", out},
                    {"ensemble_validation_accuracy", accuracy(subset.labels, pred.labels)},
                    {"warnings", pred.warnings}};
        }
        if (what == "predictions") {
            const auto offset = static_cast<std::size_t>(std::max(0L, detail::param_int(p, "offset")));
            const auto limit = static_cast<std::size_t>(std::max(0L, detail::param_int(p, "limit")));
            json out = json::array();
            for (std::size_t r = offset; r < std::min(rows.size(), offset + limit); ++r) {
                json labels = json::array();
                for (std::size_t i = 0; i < members.size(); ++i)
                    labels.push_back(pred.failed[i] ? json(nullptr)
                                                    : json(data.class_labels[static_cast<std::size_t>(argmax(pred.member_proba[i].row(static_cast<Eigen::Index>(r)).transpose()))]));
                std::vector<double> proba;
                for (Eigen::Index k = 0; k < pred.proba.cols(); ++k) proba.push_back(pred.proba(static_cast<Eigen::Index>(r), k));
                out.push_back({{"row", rows[r]},
                               {"label", data.class_labels[static_cast<std::size_t>(subset.labels[r])]},
                               {"members", labels},
                               {"ensemble", data.class_labels[static_cast<std::size_t>(pred.labels[r])]},
                               {"ensemble_proba", proba}});
            }
            json names = json::array();
            for (const auto& m : members) names.push_back(m.name);
            return {{"available", true},
                    {"split", train ? "train" : "validation"},
                    {"members", names},
                    {"total_rows", rows.size()},
                    {"offset", offset},
                    {"rows", out},
                    {"warnings", pred.warnings}};
        }
        throw Error(ErrorKind::not_found, "unknown ensemble analysis '" + what + "'");
    }

    EngineConfig cfg_;
    AnalysisCache cache_;
    std::map<std::string, std::unique_ptr<RunState>> runs_;
};

}  // namespace runlens

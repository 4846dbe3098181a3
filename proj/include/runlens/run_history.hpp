#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "pipeline_graph.hpp"
#include "search_space.hpp"

namespace runlens {

inline constexpr int interchange_major_version = 1;

struct Candidate {
    std::string id;
    PipelineGraph pipeline;
    Config config;
    double timestamp = 0.0;
    std::optional<double> train_performance;
    /// Empty for crashed or timed-out candidates; those are skipped by numeric analyses.
    std::optional<double> validation_performance;
    double fit_duration = 0.0;
    double predict_duration = 0.0;
    std::optional<double> budget;

    bool scored() const { return validation_performance.has_value(); }
};

struct EnsembleMember {
    std::string candidate_id;
    double weight = 0.0;
};

struct EnsembleSpec {
    std::vector<EnsembleMember> members;
};

struct DatasetRef {
    std::string path;  // as written in the file
    std::string target;
    std::vector<ColumnDeclaration> columns;
    std::optional<std::vector<std::string>> class_labels;
};

/// Immutable record of one AutoML run.
struct RunHistory {
    std::string run_id;
    std::string metric_name = "accuracy";
    std::string task = "classification";
    std::vector<SearchSpace> search_spaces;
    SearchSpace merged_space;
    std::vector<Candidate> candidates;
    std::optional<EnsembleSpec> ensemble;
    DatasetRef dataset_ref;
    std::optional<Dataset> dataset;

    const Candidate& candidate(const std::string& id) const {
        for (const auto& c : candidates)
            if (c.id == id) return c;
        throw Error(ErrorKind::not_found, "unknown candidate '" + id + "'");
    }

    bool has_candidate(const std::string& id) const {
        for (const auto& c : candidates)
            if (c.id == id) return true;
        return false;
    }

    const Dataset& data() const {
        if (!dataset) throw Error(ErrorKind::not_found, "run '" + run_id + "' has no dataset loaded");
        return *dataset;
    }

    /// Candidates in merge order: timestamp, then candidate id.
    std::vector<const Candidate*> ordered_candidates() const {
        std::vector<const Candidate*> out;
        for (const auto& c : candidates) out.push_back(&c);
        std::stable_sort(out.begin(), out.end(), [](const Candidate* a, const Candidate* b) {
            if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
            return a->id < b->id;
        });
        return out;
    }
};

namespace detail {

inline Hyperparameter hyperparameter_from_json(const json& j) {
    Hyperparameter hp;
    hp.name = j.at("name").get<std::string>();
    hp.kind = hp_kind_from_string(j.at("kind").get<std::string>());
    if (hp.numeric()) {
        hp.lower = j.at("lower").get<double>();
        hp.upper = j.at("upper").get<double>();
        hp.log_scale = j.value("log_scale", false);
    } else {
        hp.choices = j.at("choices").get<std::vector<std::string>>();
    }
    hp.default_value = value_from_json(j.at("default"));
    if (j.contains("condition") && !j.at("condition").is_null())
        hp.condition = Condition{j.at("condition").at("parent").get<std::string>(),
                                 value_from_json(j.at("condition").at("value"))};
    return hp;
}

inline std::optional<double> optional_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace detail

inline SearchSpace search_space_from_json(const json& j, const std::string& where) {
    std::vector<Hyperparameter> hps;
    try {
        for (const auto& h : j.at("hyperparameters")) hps.push_back(detail::hyperparameter_from_json(h));
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::load, where + ": " + ex.what());
    }
    std::optional<json> tmpl;
    if (j.contains("structure_template")) tmpl = j.at("structure_template");
    try {
        return SearchSpace(std::move(hps), std::move(tmpl));
    } catch (const Error& ex) {
        throw Error(ErrorKind::validation, where + ": " + ex.what());
    }
}

/// Parses and validates an interchange document. `base_dir` resolves a relative dataset path;
/// pass std::nullopt to skip loading the dataset.
inline RunHistory run_history_from_json(const json& doc, const std::optional<std::filesystem::path>& base_dir) {
    RunHistory run;
    auto field = [&](const char* key) -> const json& {
        if (!doc.contains(key)) throw Error(ErrorKind::load, std::string("$.") + key + ": missing");
        return doc.at(key);
    };
    {
        const auto& v = field("version");
        std::string ver = v.is_string() ? v.get<std::string>() : v.dump();
        int major = 0;
        try {
            major = std::stoi(ver);
        } catch (...) {
            throw Error(ErrorKind::load, "$.version: malformed version '" + ver + "'");
        }
        if (major != interchange_major_version)
            throw Error(ErrorKind::load, "$.version: unsupported major version " + std::to_string(major));
    }
    try {
        const auto& r = field("run");
        run.run_id = r.at("id").get<std::string>();
        run.metric_name = r.value("metric", std::string("accuracy"));
        run.task = r.value("task", std::string("classification"));
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::load, std::string("$.run: ") + ex.what());
    }
    if (run.task != "classification") throw Error(ErrorKind::validation, "$.run.task: only classification is supported");

    const auto& spaces = field("search_spaces");
    if (!spaces.is_array() || spaces.empty()) throw Error(ErrorKind::load, "$.search_spaces: need at least one space");
    for (std::size_t i = 0; i < spaces.size(); ++i)
        run.search_spaces.push_back(search_space_from_json(spaces[i], "$.search_spaces[" + std::to_string(i) + "]"));
    try {
        run.merged_space = merge_search_spaces(run.search_spaces);
    } catch (const Error& ex) {
        throw Error(ErrorKind::validation, std::string("$.search_spaces: ") + ex.what());
    }

    const auto& cands = field("candidates");
    if (!cands.is_array()) throw Error(ErrorKind::load, "$.candidates: must be an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        std::string where = "$.candidates[" + std::to_string(i) + "]";
        const auto& cj = cands[i];
        Candidate c;
        try {
            c.id = cj.at("id").get<std::string>();
            c.timestamp = cj.at("timestamp").get<double>();
            c.train_performance = detail::optional_number(cj, "train_performance");
            c.validation_performance = detail::optional_number(cj, "validation_performance");
            c.fit_duration = cj.value("fit_duration", 0.0);
            c.predict_duration = cj.value("predict_duration", 0.0);
            c.budget = detail::optional_number(cj, "budget");
            if (cj.contains("config"))
                for (const auto& [k, v] : cj.at("config").items()) c.config.emplace(k, value_from_json(v));
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::load, where + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error(ErrorKind::load, where + ": " + ex.what());
        }
        if (!cj.contains("pipeline")) throw Error(ErrorKind::load, where + ".pipeline: missing");
        c.pipeline = pipeline_from_json(cj.at("pipeline"), where + ".pipeline");
        if (c.pipeline.empty()) throw Error(ErrorKind::validation, "candidate '" + c.id + "': empty pipeline");
        if (!ids.insert(c.id).second) throw Error(ErrorKind::validation, "duplicate candidate id '" + c.id + "'");
        for (auto perf : {c.train_performance, c.validation_performance})
            if (perf && !(*perf >= 0.0 && *perf <= 1.0))
                throw Error(ErrorKind::validation, "candidate '" + c.id + "': performance outside [0,1]");
        if (c.timestamp < 0.0) throw Error(ErrorKind::validation, "candidate '" + c.id + "': negative timestamp");
        if (!run.candidates.empty() && c.timestamp < run.candidates.back().timestamp)
            throw Error(ErrorKind::validation, "candidate '" + c.id + "': timestamps must be non-decreasing");
        run.merged_space.validate_config(c.config, "candidate '" + c.id + "'");
        run.candidates.push_back(std::move(c));
    }

    if (doc.contains("ensemble") && !doc.at("ensemble").is_null()) {
        EnsembleSpec spec;
        double total = 0.0;
        try {
            for (const auto& m : doc.at("ensemble").at("members")) {
                EnsembleMember em{m.at("candidate_id").get<std::string>(), m.at("weight").get<double>()};
                if (!ids.count(em.candidate_id))
                    throw Error(ErrorKind::validation, "ensemble member '" + em.candidate_id + "' is not a candidate");
                if (em.weight < 0.0) throw Error(ErrorKind::validation, "ensemble weight must be >= 0");
                total += em.weight;
                spec.members.push_back(em);
            }
        } catch (const json::exception& ex) {
            throw Error(ErrorKind::load, std::string("$.ensemble: ") + ex.what());
        }
        if (spec.members.empty() || std::abs(total - 1.0) > 1e-9)
            throw Error(ErrorKind::validation, "ensemble weights must sum to 1");
        run.ensemble = std::move(spec);
    }

    try {
        const auto& d = field("dataset_ref");
        run.dataset_ref.path = d.at("path").get<std::string>();
        run.dataset_ref.target = d.at("target").get<std::string>();
        if (d.contains("columns"))
            for (const auto& c : d.at("columns")) {
                ColumnDeclaration decl{c.at("name").get<std::string>(),
                                       c.at("kind").get<std::string>() == "categorical" ? ColumnKind::categorical
                                                                                        : ColumnKind::numeric,
                                       std::nullopt};
                if (c.contains("vocabulary")) decl.vocabulary = c.at("vocabulary").get<std::vector<std::string>>();
                run.dataset_ref.columns.push_back(std::move(decl));
            }
        if (d.contains("class_labels")) run.dataset_ref.class_labels = d.at("class_labels").get<std::vector<std::string>>();
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::load, std::string("$.dataset_ref: ") + ex.what());
    }
    if (base_dir) {
        std::filesystem::path p(run.dataset_ref.path);
        if (p.is_relative()) p = *base_dir / p;
        run.dataset = dataset_from_csv(read_text_file(p.string()), run.dataset_ref.target, run.dataset_ref.columns,
                                       run.dataset_ref.class_labels);
    }
    return run;
}

inline RunHistory load_run_history(const std::string& path, bool with_dataset = true) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& ex) {
        throw Error(ErrorKind::load, path + ": " + ex.what());
    }
    std::optional<std::filesystem::path> base;
    if (with_dataset) base = std::filesystem::path(path).parent_path();
    return run_history_from_json(doc, base);
}

inline json to_json(const Candidate& c) {
    json j;
    j["id"] = c.id;
    j["pipeline"] = to_json(c.pipeline);
    j["config"] = config_to_json(c.config);
    j["timestamp"] = c.timestamp;
    j["train_performance"] = c.train_performance ? json(*c.train_performance) : json(nullptr);
    j["validation_performance"] = c.validation_performance ? json(*c.validation_performance) : json(nullptr);
    j["fit_duration"] = c.fit_duration;
    j["predict_duration"] = c.predict_duration;
    if (c.budget) j["budget"] = *c.budget;
    return j;
}

/// Inverse of run_history_from_json.
inline json to_json(const RunHistory& run) {
    json j;
    j["version"] = "1.0";
    j["run"] = {{"id", run.run_id}, {"metric", run.metric_name}, {"task", run.task}};
    j["search_spaces"] = json::array();
    for (const auto& s : run.search_spaces) j["search_spaces"].push_back(to_json(s));
    j["candidates"] = json::array();
    for (const auto& c : run.candidates) j["candidates"].push_back(to_json(c));
    if (run.ensemble) {
        json members = json::array();
        for (const auto& m : run.ensemble->members) members.push_back({{"candidate_id", m.candidate_id}, {"weight", m.weight}});
        j["ensemble"] = {{"members", members}};
    }
    json d{{"path", run.dataset_ref.path}, {"target", run.dataset_ref.target}};
    if (!run.dataset_ref.columns.empty()) {
        d["columns"] = json::array();
        for (const auto& c : run.dataset_ref.columns) {
            json cj{{"name", c.name}, {"kind", to_string(c.kind)}};
            if (c.vocabulary) cj["vocabulary"] = *c.vocabulary;
            d["columns"].push_back(cj);
        }
    }
    if (run.dataset_ref.class_labels) d["class_labels"] = *run.dataset_ref.class_labels;
    j["dataset_ref"] = d;
    return j;
}

}  // namespace runlens

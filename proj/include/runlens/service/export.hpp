#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "engine.hpp"

namespace runlens {

struct WrittenFile {
    std::string path;  // relative to the output directory
    int status = 200;
};

inline std::string file_extension(const AnalysisRequest& req) {
    auto it = req.params.find("format");
    if (it == req.params.end()) return ".json";
    if (it->second == "csv") return ".csv";
    if (it->second == "dot") return ".dot";
    return ".json";
}

/// Relative output path of one analysis: candidate analyses go under candidates/<id>/.
inline std::string analysis_filename(const AnalysisRequest& req, const std::string& stem = "") {
    std::string name = stem.empty() ? req.op : stem;
    std::replace(name.begin(), name.end(), '/', '-');
    std::string dir = req.candidate_id.empty() ? "" : "candidates/" + req.candidate_id + "/";
    return dir + name + file_extension(req);
}

inline void write_file(const std::filesystem::path& out_dir, const std::string& rel, const std::string& content) {
    const auto path = out_dir / rel;
    std::filesystem::create_directories(path.parent_path());
    write_text_file(path.string(), content);
}

/// Runs one analysis and writes its body (or its error document) under `out_dir`.
inline WrittenFile write_analysis(Engine& engine, const AnalysisRequest& req, const std::filesystem::path& out_dir,
                                  const std::string& stem = "") {
    const auto r = engine.handle(req);
    std::string rel = analysis_filename(req, stem);
    if (r.status != 200) rel = rel.substr(0, rel.rfind('.')) + ".error.json";
    write_file(out_dir, rel, r.body);
    return {rel, r.status};
}

/// Every analysis and export of one run, written to `out_dir`, plus an index.json listing
/// each file with its status.
inline std::vector<WrittenFile> sweep(Engine& engine, const std::string& run_id, const std::filesystem::path& out_dir) {
    const auto& run = engine.state(run_id).run();
    std::vector<WrittenFile> files;
    auto add = [&](AnalysisRequest req, const std::string& stem = "") {
        req.run_id = run_id;
        files.push_back(write_analysis(engine, req, out_dir, stem));
    };
    add({"", "", "overview", {}});
    add({"", "", "leaderboard", {}});
    add({"", "", "structure-graph", {}});
    add({"", "", "structure-graph", {{"format", "dot"}}});
    add({"", "", "cpc", {}});
    add({"", "", "coverage", {}});
    add({"", "", "coverage", {{"format", "csv"}}});
    add({"", "", "hp-importance", {}});
    for (const auto& hp : run.merged_space.hyperparameters()) add({"", "", "sampling", {{"hp", hp.name}}}, "sampling-" + hp.name);
    add({"", "", "ensemble/members", {}});
    add({"", "", "ensemble/predictions", {}});
    add({"", "", "ensemble/surfaces", {}});
    for (const auto& c : run.candidates) {
        add({"", c.id, "config", {}});
        add({"", c.id, "report", {}});
        add({"", c.id, "surrogate", {}});
        add({"", c.id, "local-surrogate", {}});
        add({"", c.id, "effects", {}});
        add({"", c.id, "intermediate", {}}, "intermediate-source");
        for (const auto& n : c.pipeline.nodes()) add({"", c.id, "intermediate", {{"node", n.id}}}, "intermediate-" + n.id);
    }

    std::vector<json> exports{{{"artifact", "importance-table"}}, {{"artifact", "coverage-embedding"}}};
    for (const auto& c : run.candidates) {
        exports.push_back({{"artifact", "config"}, {"candidate_id", c.id}});
        exports.push_back({{"artifact", "surrogate-tree"}, {"candidate_id", c.id}});
        exports.push_back({{"artifact", "intermediate-dataset"}, {"candidate_id", c.id}});
    }
    for (auto& req : exports) {
        req["run_id"] = run_id;
        try {
            const auto file = engine.export_artifact(req);
            write_file(out_dir, "exports/" + file.filename, file.content);
            files.push_back({"exports/" + file.filename, 200});
        } catch (const Error& e) {
            const auto rel = "exports/" + req.at("artifact").get<std::string>() +
                             (req.contains("candidate_id") ? "_" + req.at("candidate_id").get<std::string>() : "") + ".error.json";
            write_file(out_dir, rel, error_body(e.kind(), e.what()));
            files.push_back({rel, http_status(e.kind())});
        }
    }

    json index = json::array();
    for (const auto& f : files) index.push_back({{"path", f.path}, {"status", f.status}});
    write_file(out_dir, "index.json", index.dump(2) + "\n");
    return files;
}

}  // namespace runlens

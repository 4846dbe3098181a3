#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"

namespace runlens {

/// Identifier of the virtual data source every pipeline starts from.
inline constexpr std::string_view source_node_id = "source";

struct PipelineNode {
    std::string id;
    std::string primitive;
    std::string config_key_prefix;

    bool operator==(const PipelineNode&) const = default;
};

struct PipelineEdge {
    std::string from;  // may be source_node_id
    std::string to;
    std::optional<std::vector<std::string>> column_subset;

    bool operator==(const PipelineEdge&) const = default;
};

/// A candidate's structure: a DAG of primitives fed by the virtual source, ending in one sink.
/// Nodes without incoming edges are fed by the source implicitly.
class PipelineGraph {
public:
    PipelineGraph() = default;

    PipelineGraph(std::vector<PipelineNode> nodes, std::vector<PipelineEdge> edges)
        : nodes_(std::move(nodes)), edges_(std::move(edges)) {
        build();
    }

    const std::vector<PipelineNode>& nodes() const { return nodes_; }
    /// Edges as declared, without the implicit source edges.
    const std::vector<PipelineEdge>& edges() const { return edges_; }
    /// Declared edges plus implicit source edges.
    const std::vector<PipelineEdge>& all_edges() const { return all_edges_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw Error(ErrorKind::not_found, "unknown pipeline node '" + id + "'");
        return it->second;
    }
    bool has_node(const std::string& id) const { return index_.count(id) != 0; }
    const PipelineNode& node(const std::string& id) const { return nodes_[index_of(id)]; }

    /// Node indices in a deterministic topological order (Kahn, smallest index first).
    const std::vector<std::size_t>& topological_order() const { return topo_; }
    /// Longest-path distance from the source; nodes fed directly by the source are layer 0.
    const std::vector<int>& layers() const { return layers_; }
    std::size_t sink() const { return sink_; }

    /// Incoming edges (including the implicit source edges) of node `i`, in declaration order.
    std::vector<const PipelineEdge*> in_edges(std::size_t i) const {
        std::vector<const PipelineEdge*> out;
        for (const auto& e : all_edges_)
            if (e.to == nodes_[i].id) out.push_back(&e);
        return out;
    }

    std::vector<std::size_t> ancestors_and_self(std::size_t i) const {
        std::set<std::size_t> seen{i};
        std::vector<std::size_t> stack{i};
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto* e : in_edges(cur)) {
                if (e->from == source_node_id) continue;
                auto p = index_of(e->from);
                if (seen.insert(p).second) stack.push_back(p);
            }
        }
        std::vector<std::size_t> out;
        for (auto t : topo_)
            if (seen.count(t)) out.push_back(t);
        return out;
    }

    int max_path_length() const {
        int best = 0;
        for (int l : layers_) best = std::max(best, l + 1);
        return best;
    }

private:
    void build() {
        if (nodes_.empty()) {
            if (!edges_.empty()) throw Error(ErrorKind::validation, "pipeline without nodes has edges");
            return;
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].id == source_node_id)
                throw Error(ErrorKind::validation, "node id 'source' is reserved");
            if (!index_.emplace(nodes_[i].id, i).second)
                throw Error(ErrorKind::validation, "duplicate pipeline node '" + nodes_[i].id + "'");
        }
        std::vector<int> indeg(nodes_.size(), 0);
        for (const auto& e : edges_) {
            if (e.from != source_node_id && !index_.count(e.from))
                throw Error(ErrorKind::validation, "edge from unknown node '" + e.from + "'");
            if (!index_.count(e.to))
                throw Error(ErrorKind::validation, "edge to unknown node '" + e.to + "'");
            indeg[index_.at(e.to)]++;
        }
        all_edges_.clear();
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (indeg[i] == 0) all_edges_.push_back({std::string(source_node_id), nodes_[i].id, std::nullopt});
        all_edges_.insert(all_edges_.end(), edges_.begin(), edges_.end());
        for (const auto& e : all_edges_)
            if (e.column_subset && count_out(e.from) < 2)
                throw Error(ErrorKind::validation,
                            "column_subset on edge " + e.from + "->" + e.to +
                                " whose source has out-degree 1");

        // Kahn topological sort
        std::vector<int> remaining(nodes_.size(), 0);
        for (const auto& e : all_edges_)
            if (e.from != source_node_id) remaining[index_.at(e.to)]++;
        std::set<std::size_t> ready;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (remaining[i] == 0) ready.insert(i);
        layers_.assign(nodes_.size(), 0);
        while (!ready.empty()) {
            auto cur = *ready.begin();
            ready.erase(ready.begin());
            topo_.push_back(cur);
            for (const auto& e : all_edges_) {
                if (e.from != nodes_[cur].id) continue;
                auto to = index_.at(e.to);
                layers_[to] = std::max(layers_[to], layers_[cur] + 1);
                if (--remaining[to] == 0) ready.insert(to);
            }
        }
        if (topo_.size() != nodes_.size()) throw Error(ErrorKind::validation, "pipeline graph has a cycle");

        std::vector<std::size_t> sinks;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (count_out(nodes_[i].id) == 0) sinks.push_back(i);
        if (sinks.size() != 1) throw Error(ErrorKind::validation, "pipeline graph must have exactly one sink");
        sink_ = sinks.front();
    }

    int count_out(const std::string& id) const {
        int n = 0;
        for (const auto& e : all_edges_)
            if (e.from == id) ++n;
        return n;
    }

    std::vector<PipelineNode> nodes_;
    std::vector<PipelineEdge> edges_;
    std::vector<PipelineEdge> all_edges_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::size_t> topo_;
    std::vector<int> layers_;
    std::size_t sink_ = 0;
};

inline json to_json(const PipelineGraph& g) {
    json j;
    j["nodes"] = json::array();
    for (const auto& n : g.nodes())
        j["nodes"].push_back({{"id", n.id}, {"primitive", n.primitive}, {"config_key_prefix", n.config_key_prefix}});
    j["edges"] = json::array();
    for (const auto& e : g.edges()) {
        json je{{"from", e.from}, {"to", e.to}};
        if (e.column_subset) je["column_subset"] = *e.column_subset;
        j["edges"].push_back(je);
    }
    return j;
}

inline PipelineGraph pipeline_from_json(const json& j, const std::string& where) {
    std::vector<PipelineNode> nodes;
    std::vector<PipelineEdge> edges;
    try {
        for (const auto& n : j.at("nodes"))
            nodes.push_back({n.at("id").get<std::string>(), n.at("primitive").get<std::string>(),
                             n.value("config_key_prefix", std::string())});
        if (j.contains("edges"))
            for (const auto& e : j.at("edges")) {
                PipelineEdge edge{e.at("from").get<std::string>(), e.at("to").get<std::string>(), std::nullopt};
                if (e.contains("column_subset") && !e.at("column_subset").is_null())
                    edge.column_subset = e.at("column_subset").get<std::vector<std::string>>();
                edges.push_back(std::move(edge));
            }
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::load, where + ": " + ex.what());
    }
    try {
        return PipelineGraph(std::move(nodes), std::move(edges));
    } catch (const Error& ex) {
        throw Error(ErrorKind::validation, where + ": " + ex.what());
    }
}

}  // namespace runlens

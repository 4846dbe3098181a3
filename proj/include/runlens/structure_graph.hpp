#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "hungarian.hpp"
#include "run_history.hpp"

namespace runlens {

/// Tunable matching constants. Identical primitives on the same topological layer cost 0,
/// so they always match before anything else.
struct MatchCosts {
    double primitive_mismatch = 1.0;
    double per_layer_offset = 0.5;
    double insertion = 1.0;
    double deletion = 1.0;
};

/// Square-padded cost matrix: rows are nodes of the first graph, columns nodes of the second.
/// Dummy rows encode insertions of second-graph nodes, dummy columns deletions of first-graph nodes.
struct CostMatrix {
    Matrix cost;
    std::size_t real_rows = 0;
    std::size_t real_cols = 0;
};

inline constexpr int merged_source_id = -1;

struct MergedNode {
    int id = 0;
    std::string primitive;
    std::vector<std::string> members;
    std::set<std::string> config_key_prefixes;

    std::size_t occurrences() const { return members.size(); }
};

struct MergedEdge {
    int from = merged_source_id;
    int to = 0;
    std::optional<std::vector<std::string>> column_subset;
    std::vector<std::string> members;
};

/// The structure search graph: all candidate pipelines folded into one DAG.
class MergedGraph {
public:
    const std::vector<MergedNode>& nodes() const { return nodes_; }
    const std::vector<MergedEdge>& edges() const { return edges_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    std::size_t candidate_count() const { return mapping_.size(); }

    /// candidate id -> (pipeline node id -> merged node id)
    const std::map<std::string, std::map<std::string, int>>& mapping() const { return mapping_; }

    std::vector<std::string> primitives() const {
        std::vector<std::string> out;
        for (const auto& n : nodes_) out.push_back(n.primitive);
        return out;
    }

    /// Longest-path layer of every node (nodes fed by the source are layer 0).
    std::vector<int> layers() const {
        std::vector<int> layer(nodes_.size(), 0);
        // nodes are appended in a topological order of each merged pipeline, but an edge can
        // still point backwards in id order, so relax until stable
        bool changed = true;
        for (std::size_t pass = 0; changed && pass <= nodes_.size(); ++pass) {
            changed = false;
            for (const auto& e : edges_) {
                if (e.from == merged_source_id) continue;
                int want = layer[static_cast<std::size_t>(e.from)] + 1;
                if (want > layer[static_cast<std::size_t>(e.to)]) {
                    layer[static_cast<std::size_t>(e.to)] = want;
                    changed = true;
                }
            }
        }
        return layer;
    }

    int max_path_length() const {
        int best = 0;
        for (int l : layers()) best = std::max(best, l + 1);
        return best;
    }

    bool is_acyclic() const {
        std::vector<int> indeg(nodes_.size(), 0);
        for (const auto& e : edges_)
            if (e.from != merged_source_id) indeg[static_cast<std::size_t>(e.to)]++;
        std::vector<int> ready;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
        std::size_t seen = 0;
        while (!ready.empty()) {
            int cur = ready.back();
            ready.pop_back();
            ++seen;
            for (const auto& e : edges_)
                if (e.from == cur && --indeg[static_cast<std::size_t>(e.to)] == 0) ready.push_back(e.to);
        }
        return seen == nodes_.size();
    }

private:
    friend MergedGraph merge(const MergedGraph&, const PipelineGraph&, const std::string&, const MatchCosts&);

    std::vector<MergedNode> nodes_;
    std::vector<MergedEdge> edges_;
    std::map<std::string, std::map<std::string, int>> mapping_;
};

namespace detail {

inline CostMatrix cost_matrix(const std::vector<std::string>& prim1, const std::vector<int>& layer1,
                              const std::vector<std::string>& prim2, const std::vector<int>& layer2,
                              const MatchCosts& costs) {
    CostMatrix cm;
    cm.real_rows = prim1.size();
    cm.real_cols = prim2.size();
    const auto n = static_cast<Eigen::Index>(std::max(prim1.size(), prim2.size()));
    cm.cost = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const bool real_row = static_cast<std::size_t>(i) < prim1.size();
            const bool real_col = static_cast<std::size_t>(j) < prim2.size();
            if (real_row && real_col) {
                const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
                double c = prim1[ui] == prim2[uj] ? 0.0 : costs.primitive_mismatch;
                c += costs.per_layer_offset * std::abs(layer1[ui] - layer2[uj]);
                cm.cost(i, j) = c;
            } else if (real_row) {
                cm.cost(i, j) = costs.deletion;
            } else if (real_col) {
                cm.cost(i, j) = costs.insertion;
            }
        }
    }
    return cm;
}

inline std::vector<std::string> primitives_of(const PipelineGraph& g) {
    std::vector<std::string> out;
    for (const auto& n : g.nodes()) out.push_back(n.primitive);
    return out;
}

}  // namespace detail

inline CostMatrix build_cost_matrix(const PipelineGraph& g1, const PipelineGraph& g2, const MatchCosts& costs = {}) {
    return detail::cost_matrix(detail::primitives_of(g1), g1.layers(), detail::primitives_of(g2), g2.layers(), costs);
}

inline CostMatrix build_cost_matrix(const MergedGraph& g1, const PipelineGraph& g2, const MatchCosts& costs = {}) {
    return detail::cost_matrix(g1.primitives(), g1.layers(), detail::primitives_of(g2), g2.layers(), costs);
}

/// Folds one pipeline into the merged graph. A pipeline node joins an existing merged node only
/// when the assignment selects that pair and its substitution cost is exactly 0; every other
/// node is added. Edges are the union of both edge sets on merged ids.
inline MergedGraph merge(const MergedGraph& g1, const PipelineGraph& g2, const std::string& candidate_id,
                         const MatchCosts& costs = {}) {
    MergedGraph out = g1;
    std::vector<int> target(g2.size(), -1);
    if (!g1.empty()) {
        auto cm = build_cost_matrix(g1, g2, costs);
        auto assignment = hungarian(cm.cost);
        for (std::size_t i = 0; i < cm.real_rows; ++i) {
            const int j = assignment.row_to_col[i];
            if (j < 0 || static_cast<std::size_t>(j) >= cm.real_cols) continue;
            if (cm.cost(static_cast<Eigen::Index>(i), j) == 0.0) target[static_cast<std::size_t>(j)] = static_cast<int>(i);
        }
    }
    auto& mapping = out.mapping_[candidate_id];
    for (auto idx : g2.topological_order()) {
        const auto& node = g2.nodes()[idx];
        int id = target[idx];
        if (id < 0) {
            id = static_cast<int>(out.nodes_.size());
            out.nodes_.push_back({id, node.primitive, {}, {}});
            target[idx] = id;
        }
        auto& merged = out.nodes_[static_cast<std::size_t>(id)];
        merged.members.push_back(candidate_id);
        if (!node.config_key_prefix.empty()) merged.config_key_prefixes.insert(node.config_key_prefix);
        mapping[node.id] = id;
    }
    for (const auto& e : g2.all_edges()) {
        const int from = e.from == source_node_id ? merged_source_id : mapping.at(e.from);
        const int to = mapping.at(e.to);
        auto it = std::find_if(out.edges_.begin(), out.edges_.end(), [&](const MergedEdge& m) {
            return m.from == from && m.to == to && m.column_subset == e.column_subset;
        });
        if (it == out.edges_.end()) {
            out.edges_.push_back({from, to, e.column_subset, {candidate_id}});
        } else {
            it->members.push_back(candidate_id);
        }
    }
    return out;
}

/// Left fold of `merge` over the candidates with timestamp <= t, in merge order.
inline MergedGraph snapshot(const RunHistory& history, double t, const MatchCosts& costs = {}) {
    MergedGraph g;
    for (const auto* c : history.ordered_candidates()) {
        if (c->timestamp > t) break;
        g = merge(g, c->pipeline, c->id, costs);
    }
    return g;
}

/// Prefix-fold cache: snapshot k is the merge of the first k candidates in merge order.
/// Concurrent readers, exclusive extension.
class SnapshotCache {
public:
    explicit SnapshotCache(const RunHistory& history, MatchCosts costs = {})
        : history_(history), order_(history.ordered_candidates()), costs_(costs) {
        prefixes_.emplace_back();
    }

    /// Number of candidates with timestamp <= t.
    std::size_t count_at(double t) const {
        std::size_t k = 0;
        while (k < order_.size() && order_[k]->timestamp <= t) ++k;
        return k;
    }

    MergedGraph at_time(double t) { return prefix(count_at(t)); }

    MergedGraph prefix(std::size_t k) {
        k = std::min(k, order_.size());
        {
            std::shared_lock lock(mutex_);
            if (k < prefixes_.size()) return prefixes_[k];
        }
        std::unique_lock lock(mutex_);
        while (prefixes_.size() <= k) {
            const auto* c = order_[prefixes_.size() - 1];
            prefixes_.push_back(merge(prefixes_.back(), c->pipeline, c->id, costs_));
        }
        return prefixes_[k];
    }

private:
    const RunHistory& history_;
    std::vector<const Candidate*> order_;
    MatchCosts costs_;
    std::shared_mutex mutex_;
    std::vector<MergedGraph> prefixes_;
};

namespace detail {
inline std::string subset_label(const std::vector<std::string>& cols) {
    std::string s;
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
    return s;
}
inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}
}  // namespace detail

inline std::string to_dot(const MergedGraph& g) {
    std::ostringstream os;
    os << "digraph structure_search_graph {\n";
    os << "  rankdir=LR;\n";
    os << "  source [label=\"source\", shape=box];\n";
    for (const auto& n : g.nodes())
        os << "  n" << n.id << " [label=\"" << detail::dot_escape(n.primitive) << "\\n" << n.occurrences()
           << "\"];\n";
    for (const auto& e : g.edges()) {
        os << "  " << (e.from == merged_source_id ? std::string("source") : "n" + std::to_string(e.from)) << " -> n"
           << e.to;
        if (e.column_subset) os << " [label=\"" << detail::dot_escape(detail::subset_label(*e.column_subset)) << "\"]";
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

inline json to_json(const MergedGraph& g) {
    json j;
    j["nodes"] = json::array();
    auto layers = g.layers();
    for (const auto& n : g.nodes()) {
        j["nodes"].push_back({{"id", n.id},
                              {"primitive", n.primitive},
                              {"members", n.members},
                              {"occurrences", n.occurrences()},
                              {"layer", layers[static_cast<std::size_t>(n.id)]},
                              {"config_key_prefixes", n.config_key_prefixes}});
    }
    j["edges"] = json::array();
    for (const auto& e : g.edges()) {
        json je{{"from", e.from == merged_source_id ? json("source") : json(e.from)},
                {"to", e.to},
                {"members", e.members},
                {"occurrences", e.members.size()}};
        je["column_subset"] = e.column_subset ? json(*e.column_subset) : json(nullptr);
        j["edges"].push_back(je);
    }
    j["candidate_count"] = g.candidate_count();
    return j;
}

}  // namespace runlens

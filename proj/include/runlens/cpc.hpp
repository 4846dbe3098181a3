#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "structure_graph.hpp"

namespace runlens {

enum class AxisKind { step, algorithm, hyperparameter, group };

inline std::string_view to_string(AxisKind k) {
    switch (k) {
        case AxisKind::step: return "step";
        case AxisKind::algorithm: return "algorithm";
        case AxisKind::hyperparameter: return "hyperparameter";
        case AxisKind::group: return "group";
    }
    return "";
}

struct CpcAxis {
    std::string id;
    AxisKind kind = AxisKind::step;
    std::string label;
    int layer = -1;
    int lane = 0;
    std::string lane_label;
    int merged_node = -1;
    std::string hyperparameter;
    bool numeric = false;
    double lower = 0.0, upper = 1.0;
    bool log_scale = false;
    std::vector<std::string> categories;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;

    /// Step and hyperparameter axes carry coordinates; algorithm and group axes only nest.
    bool has_coordinate() const { return kind == AxisKind::step || kind == AxisKind::hyperparameter; }
};

/// Hierarchical axes: steps (split into parallel lanes where the pipeline branches) expand to
/// algorithms, algorithms expand to their hyperparameters following the condition tree.
/// Hyperparameters no pipeline node houses sit under a trailing "search-space" group.
struct CpcAxisTree {
    std::vector<CpcAxis> axes;
    std::vector<std::size_t> roots;
    /// Coordinate-bearing axes in display order (depth-first).
    std::vector<std::size_t> coordinate_axes;

    std::size_t index_of(const std::string& id) const {
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (axes[i].id == id) return i;
        throw Error(ErrorKind::not_found, "unknown axis '" + id + "'");
    }

    std::size_t lane_count(int layer) const {
        std::size_t n = 0;
        for (auto r : roots)
            if (axes[r].kind == AxisKind::step && axes[r].layer == layer) ++n;
        return n;
    }
};

struct Coordinate {
    std::size_t axis = 0;
    std::optional<Value> value;  // empty = MISSING
    double normalized = 0.0;

    bool missing() const { return !value.has_value(); }
};

struct CandidatePolyline {
    std::string candidate_id;
    std::vector<Coordinate> coordinates;

    std::size_t present_count() const {
        std::size_t n = 0;
        for (const auto& c : coordinates)
            if (!c.missing()) ++n;
        return n;
    }
};

namespace detail {

/// Lane key of every merged node: the column subset on its first labelled in-edge, otherwise the
/// common lane of its parents, otherwise "".
inline std::vector<std::string> lane_keys(const MergedGraph& g) {
    const auto layers = g.layers();
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return layers[a] < layers[b]; });
    std::vector<std::string> keys(g.size());
    for (auto v : order) {
        std::optional<std::string> labelled;
        std::set<std::string> parent_keys;
        for (const auto& e : g.edges()) {
            if (e.to != static_cast<int>(v)) continue;
            if (e.column_subset && !labelled) labelled = subset_label(*e.column_subset);
            parent_keys.insert(e.from == merged_source_id ? std::string() : keys[static_cast<std::size_t>(e.from)]);
        }
        if (labelled) keys[v] = *labelled;
        else if (parent_keys.size() == 1) keys[v] = *parent_keys.begin();
        else keys[v] = "";
    }
    return keys;
}

inline double normalize(const Hyperparameter& hp, const Value& v) {
    if (hp.numeric()) {
        double x = as_number(v);
        if (hp.log_scale) return (std::log(x) - std::log(hp.lower)) / (std::log(hp.upper) - std::log(hp.lower));
        return (x - hp.lower) / (hp.upper - hp.lower);
    }
    if (hp.choices.size() <= 1) return 0.5;
    return static_cast<double>(hp.choice_index(as_string(v))) / static_cast<double>(hp.choices.size() - 1);
}

}  // namespace detail

inline CpcAxisTree build_axes(const MergedGraph& merged, const SearchSpace& space) {
    CpcAxisTree tree;
    const auto layers = merged.layers();
    const auto keys = detail::lane_keys(merged);

    // longest prefix that houses each hyperparameter
    std::set<std::string> prefixes;
    for (const auto& n : merged.nodes()) prefixes.insert(n.config_key_prefixes.begin(), n.config_key_prefixes.end());
    std::map<std::string, std::string> housing;
    for (const auto& hp : space.hyperparameters()) {
        std::string best;
        bool found = false;
        for (const auto& p : prefixes)
            if (hp.name.rfind(p, 0) == 0 && (!found || p.size() > best.size())) {
                best = p;
                found = true;
            }
        if (found) housing[hp.name] = best;
    }

    auto add_hp_axes = [&](std::size_t owner, const std::vector<const Hyperparameter*>& hps, int merged_node) {
        std::map<std::string, std::size_t> axis_of;
        for (const auto* hp : hps) {
            CpcAxis a;
            a.id = "hp:" + (merged_node >= 0 ? std::to_string(merged_node) : std::string("global")) + ":" + hp->name;
            a.kind = AxisKind::hyperparameter;
            a.label = hp->name;
            a.merged_node = merged_node;
            a.hyperparameter = hp->name;
            a.numeric = hp->numeric();
            a.lower = hp->lower;
            a.upper = hp->upper;
            a.log_scale = hp->log_scale;
            a.categories = hp->choices;
            std::size_t parent = owner;
            if (hp->condition) {
                auto it = axis_of.find(hp->condition->parent);
                if (it != axis_of.end()) parent = it->second;
            }
            a.parent = parent;
            const auto idx = tree.axes.size();
            tree.axes.push_back(std::move(a));
            tree.axes[parent].children.push_back(idx);
            axis_of[hp->name] = idx;
        }
    };
    // search-space order already lists parents before children when conditions are declared
    // top-down; sort by depth to guarantee it
    auto hps_sorted = [&](auto pred) {
        std::vector<const Hyperparameter*> out;
        for (const auto& hp : space.hyperparameters())
            if (pred(hp)) out.push_back(&hp);
        std::stable_sort(out.begin(), out.end(), [&](auto* a, auto* b) { return space.depth(a->name) < space.depth(b->name); });
        return out;
    };

    int max_layer = -1;
    for (int l : layers) max_layer = std::max(max_layer, l);
    for (int layer = 0; layer <= max_layer; ++layer) {
        // lanes ordered by first appearance (lowest merged id)
        std::vector<std::string> lanes;
        for (std::size_t v = 0; v < merged.size(); ++v)
            if (layers[v] == layer && std::find(lanes.begin(), lanes.end(), keys[v]) == lanes.end())
                lanes.push_back(keys[v]);
        for (std::size_t lane = 0; lane < lanes.size(); ++lane) {
            CpcAxis step;
            step.id = "step:" + std::to_string(layer) + (lanes.size() > 1 ? ":" + std::to_string(lane) : "");
            step.kind = AxisKind::step;
            step.label = "step " + std::to_string(layer + 1) + (lanes[lane].empty() ? "" : " [" + lanes[lane] + "]");
            step.layer = layer;
            step.lane = static_cast<int>(lane);
            step.lane_label = lanes[lane];
            const auto step_idx = tree.axes.size();
            tree.axes.push_back(step);
            tree.roots.push_back(step_idx);
            for (std::size_t v = 0; v < merged.size(); ++v) {
                if (layers[v] != layer || keys[v] != lanes[lane]) continue;
                const auto& node = merged.nodes()[v];
                auto& cats = tree.axes[step_idx].categories;
                if (std::find(cats.begin(), cats.end(), node.primitive) == cats.end()) cats.push_back(node.primitive);
                CpcAxis alg;
                alg.id = "alg:" + std::to_string(v);
                alg.kind = AxisKind::algorithm;
                alg.label = node.primitive;
                alg.layer = layer;
                alg.lane = static_cast<int>(lane);
                alg.merged_node = static_cast<int>(v);
                alg.parent = step_idx;
                const auto alg_idx = tree.axes.size();
                tree.axes.push_back(alg);
                tree.axes[step_idx].children.push_back(alg_idx);
                add_hp_axes(alg_idx,
                            hps_sorted([&](const Hyperparameter& hp) {
                                auto it = housing.find(hp.name);
                                return it != housing.end() && node.config_key_prefixes.count(it->second);
                            }),
                            static_cast<int>(v));
            }
        }
    }
    auto unhoused = hps_sorted([&](const Hyperparameter& hp) { return !housing.count(hp.name); });
    if (!unhoused.empty()) {
        CpcAxis group;
        group.id = "group:search-space";
        group.kind = AxisKind::group;
        group.label = "search space";
        const auto gidx = tree.axes.size();
        tree.axes.push_back(group);
        tree.roots.push_back(gidx);
        add_hp_axes(gidx, unhoused, -1);
    }

    std::vector<std::size_t> stack(tree.roots.rbegin(), tree.roots.rend());
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        if (tree.axes[cur].has_coordinate()) tree.coordinate_axes.push_back(cur);
        const auto& ch = tree.axes[cur].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return tree;
}

/// Places a candidate on every coordinate axis; absent steps and inactive hyperparameters are MISSING.
inline CandidatePolyline project(const Candidate& candidate, const CpcAxisTree& axes, const MergedGraph& merged,
                                 const SearchSpace& space) {
    auto mit = merged.mapping().find(candidate.id);
    if (mit == merged.mapping().end())
        throw Error(ErrorKind::not_found, "candidate '" + candidate.id + "' is not part of the structure graph");
    std::set<int> member_of;
    for (const auto& [node, mid] : mit->second) member_of.insert(mid);

    CandidatePolyline line{candidate.id, {}};
    for (auto idx : axes.coordinate_axes) {
        const auto& axis = axes.axes[idx];
        Coordinate c{idx, std::nullopt, 0.0};
        if (axis.kind == AxisKind::step) {
            for (auto ch : axis.children) {
                const auto& alg = axes.axes[ch];
                if (!member_of.count(alg.merged_node)) continue;
                c.value = alg.label;
                auto pos = std::find(axis.categories.begin(), axis.categories.end(), alg.label) - axis.categories.begin();
                c.normalized = axis.categories.size() <= 1
                                   ? 0.5
                                   : static_cast<double>(pos) / static_cast<double>(axis.categories.size() - 1);
                break;
            }
        } else {
            bool owner_ok = axis.merged_node < 0 || member_of.count(axis.merged_node);
            auto it = candidate.config.find(axis.hyperparameter);
            if (owner_ok && it != candidate.config.end()) {
                c.value = it->second;
                c.normalized = detail::normalize(space.at(axis.hyperparameter), it->second);
            }
        }
        line.coordinates.push_back(std::move(c));
    }
    return line;
}

/// Brush predicate on one axis: a closed numeric range, or a set of accepted categories.
struct RangePredicate {
    double lo = 0.0, hi = 1.0;
};
using CategoryPredicate = std::set<std::string>;
using AxisPredicate = std::variant<RangePredicate, CategoryPredicate>;

struct CpcModel {
    MergedGraph merged;
    CpcAxisTree axes;
    std::vector<CandidatePolyline> polylines;
};

inline CpcModel build_cpc(const RunHistory& history, const MergedGraph& merged) {
    CpcModel model{merged, build_axes(merged, history.merged_space), {}};
    for (const auto* c : history.ordered_candidates())
        if (merged.mapping().count(c->id))
            model.polylines.push_back(project(*c, model.axes, merged, history.merged_space));
    return model;
}

/// Conjunction of per-axis predicates; MISSING never satisfies a predicate.
inline std::set<std::string> brush(const CpcModel& model, const std::map<std::string, AxisPredicate>& predicates) {
    std::vector<std::pair<std::size_t, const AxisPredicate*>> resolved;
    for (const auto& [axis_id, pred] : predicates) resolved.emplace_back(model.axes.index_of(axis_id), &pred);
    std::set<std::string> out;
    for (const auto& line : model.polylines) {
        bool ok = true;
        for (const auto& [axis, pred] : resolved) {
            const Coordinate* coord = nullptr;
            for (const auto& c : line.coordinates)
                if (c.axis == axis) coord = &c;
            if (!coord || coord->missing()) {
                ok = false;
                break;
            }
            if (const auto* r = std::get_if<RangePredicate>(pred)) {
                ok = is_numeric(*coord->value) && as_number(*coord->value) >= r->lo && as_number(*coord->value) <= r->hi;
            } else {
                const auto& cats = std::get<CategoryPredicate>(*pred);
                ok = !is_numeric(*coord->value) && cats.count(as_string(*coord->value));
            }
            if (!ok) break;
        }
        if (ok) out.insert(line.candidate_id);
    }
    return out;
}

struct SamplingPoint {
    std::string candidate_id;
    double timestamp = 0.0;
    Value value;
    std::optional<double> performance;
};

struct SamplingSeries {
    std::string hyperparameter;
    std::vector<SamplingPoint> points;
    std::vector<double> bin_edges;          // numeric: bins + 1 edges (log domain edges for log axes)
    std::vector<std::string> bin_labels;    // categorical: one per choice
    std::vector<std::size_t> counts;
};

inline constexpr std::size_t default_histogram_bins = 20;

inline SamplingSeries sampling_history(const RunHistory& history, const std::string& hp_name,
                                       std::size_t bins = default_histogram_bins) {
    const auto& hp = history.merged_space.at(hp_name);
    SamplingSeries s{hp_name, {}, {}, {}, {}};
    for (const auto* c : history.ordered_candidates()) {
        auto it = c->config.find(hp_name);
        if (it == c->config.end()) continue;
        s.points.push_back({c->id, c->timestamp, it->second, c->validation_performance});
    }
    if (s.points.empty()) return s;
    if (hp.numeric()) {
        const double lo = hp.log_scale ? std::log(hp.lower) : hp.lower;
        const double hi = hp.log_scale ? std::log(hp.upper) : hp.upper;
        for (std::size_t b = 0; b <= bins; ++b)
            s.bin_edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
        s.counts.assign(bins, 0);
        for (const auto& p : s.points) {
            double x = hp.log_scale ? std::log(as_number(p.value)) : as_number(p.value);
            auto b = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * static_cast<double>(bins)));
            s.counts[std::min(b, bins - 1)]++;
        }
    } else {
        s.bin_labels = hp.choices;
        s.counts.assign(hp.choices.size(), 0);
        for (const auto& p : s.points) s.counts[static_cast<std::size_t>(hp.choice_index(as_string(p.value)))]++;
    }
    return s;
}

inline json to_json(const CpcAxisTree& t) {
    json axes = json::array();
    for (const auto& a : t.axes) {
        json j{{"id", a.id}, {"kind", to_string(a.kind)}, {"label", a.label}};
        if (a.kind == AxisKind::step) {
            j["layer"] = a.layer;
            j["lane"] = a.lane;
            j["lane_label"] = a.lane_label;
            j["categories"] = a.categories;
        }
        if (a.merged_node >= 0) j["merged_node"] = a.merged_node;
        if (a.kind == AxisKind::hyperparameter) {
            j["hyperparameter"] = a.hyperparameter;
            j["numeric"] = a.numeric;
            if (a.numeric) {
                j["lower"] = a.lower;
                j["upper"] = a.upper;
                j["log_scale"] = a.log_scale;
            } else {
                j["categories"] = a.categories;
            }
        }
        j["parent"] = a.parent ? json(t.axes[*a.parent].id) : json(nullptr);
        json children = json::array();
        for (auto c : a.children) children.push_back(t.axes[c].id);
        j["children"] = children;
        axes.push_back(j);
    }
    json roots = json::array();
    for (auto r : t.roots) roots.push_back(t.axes[r].id);
    json coords = json::array();
    for (auto c : t.coordinate_axes) coords.push_back(t.axes[c].id);
    return {{"axes", axes}, {"roots", roots}, {"coordinate_axes", coords}};
}

inline json to_json(const CpcModel& m) {
    json lines = json::array();
    for (const auto& l : m.polylines) {
        json coords = json::array();
        for (const auto& c : l.coordinates) {
            json cj{{"axis", m.axes.axes[c.axis].id}};
            if (c.missing()) {
                cj["missing"] = true;
            } else {
                cj["missing"] = false;
                cj["value"] = to_json(*c.value);
                cj["normalized"] = c.normalized;
            }
            coords.push_back(cj);
        }
        lines.push_back({{"candidate_id", l.candidate_id}, {"coordinates", coords}});
    }
    return {{"axis_tree", to_json(m.axes)}, {"polylines", lines}};
}

inline json to_json(const SamplingSeries& s) {
    json pts = json::array();
    for (const auto& p : s.points)
        pts.push_back({{"candidate_id", p.candidate_id},
                       {"timestamp", p.timestamp},
                       {"value", to_json(p.value)},
                       {"performance", p.performance ? json(*p.performance) : json(nullptr)}});
    json j{{"hyperparameter", s.hyperparameter}, {"points", pts}, {"counts", s.counts}};
    if (!s.bin_edges.empty()) j["bin_edges"] = s.bin_edges;
    if (!s.bin_labels.empty()) j["bin_labels"] = s.bin_labels;
    return j;
}

}  // namespace runlens

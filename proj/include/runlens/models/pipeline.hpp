#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "../run_history.hpp"
#include "metrics.hpp"
#include "oracle.hpp"
#include "primitives.hpp"

namespace runlens {

/// Fraction of every class held out for validation when a candidate is refit.
inline constexpr double validation_fraction = 0.25;

/// Throws unsupported-primitive naming every primitive the model engine cannot run.
inline void require_supported(const Candidate& c) {
    std::set<std::string> bad;
    for (const auto& n : c.pipeline.nodes())
        if (!models::is_supported_primitive(n.primitive)) bad.insert(n.primitive);
    if (bad.empty()) return;
    std::string names;
    for (const auto& b : bad) names += (names.empty() ? "" : ", ") + b;
    throw Error(ErrorKind::unsupported_primitive, "candidate '" + c.id + "' uses unsupported primitive(s): " + names);
}

/// A candidate pipeline refit on the training split of its dataset. Immutable once built,
/// so one instance can serve concurrent readers.
class FittedPipeline final : public PredictionOracle {
public:
    FittedPipeline(const Candidate& candidate, const Dataset& data, std::uint64_t seed)
        : candidate_id_(candidate.id),
          graph_(candidate.pipeline),
          class_labels_(data.class_labels),
          fit_duration_(candidate.fit_duration),
          predict_duration_(candidate.predict_duration) {
        require_supported(candidate);
        split_ = stratified_split(data.labels, data.n_classes(), seed, validation_fraction);
        const auto& sink = graph_.nodes()[graph_.sink()];
        if (!models::classifier_primitives().count(sink.primitive))
            throw Error(ErrorKind::unevaluable, "candidate '" + candidate.id + "': pipeline does not end in a classifier");
        try {
            fit(candidate, data.select_rows(split_.train), seed);
        } catch (const Error& e) {
            throw Error(ErrorKind::unevaluable, "candidate '" + candidate.id + "': " + e.what());
        }
    }

    const std::string& candidate_id() const { return candidate_id_; }
    const PipelineGraph& graph() const { return graph_; }
    const Split& split() const { return split_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }
    double fit_duration() const { return fit_duration_; }
    double predict_duration() const { return predict_duration_; }

    std::size_t n_classes() const override { return class_labels_.size(); }

    Matrix predict_proba(const Table& x) const override { return predict_from_outputs(x, {}); }

    /// Output of `node` (after its ancestors), or the input itself for the virtual source.
    /// A classifier node outputs its input plus a categorical prediction column.
    Table transform_until(const std::string& node, const Table& x) const {
        if (node == source_node_id) return x;
        const auto idx = graph_.index_of(node);
        std::map<std::size_t, Table> memo;
        return evaluate(idx, x, memo);
    }

    Dataset transform_until(const std::string& node, const Dataset& data) const {
        Dataset d = data;
        d.features = transform_until(node, data.features);
        return d;
    }

    /// True when every path from the source to the sink passes through `node`.
    bool dominates_sink(const std::string& node) const {
        if (node == source_node_id) return true;
        const auto skip = graph_.index_of(node);
        std::set<std::size_t> reached;
        std::vector<std::size_t> stack;
        for (const auto& e : graph_.all_edges())
            if (e.from == source_node_id) {
                auto t = graph_.index_of(e.to);
                if (t != skip && reached.insert(t).second) stack.push_back(t);
            }
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for (const auto& e : graph_.all_edges())
                if (e.from == graph_.nodes()[cur].id) {
                    auto t = graph_.index_of(e.to);
                    if (t != skip && reached.insert(t).second) stack.push_back(t);
                }
        }
        return !reached.count(graph_.sink());
    }

    /// Class probabilities given the output table of `node`; `node` must dominate the sink.
    Matrix predict_from(const std::string& node, const Table& node_output) const {
        if (node == source_node_id) return predict_proba(node_output);
        if (!dominates_sink(node))
            throw Error(ErrorKind::contract, "node '" + node + "' does not lie on every path to the sink");
        const auto idx = graph_.index_of(node);
        if (idx == graph_.sink()) throw Error(ErrorKind::contract, "the classifier node has no downstream model");
        return predict_from_outputs(Table(), {{idx, node_output}});
    }

private:
    struct Step {
        std::unique_ptr<models::Transformer> transformer;
        std::unique_ptr<models::Classifier> classifier;
    };

    Table route(std::size_t i, const Table& source, const std::map<std::size_t, Table>& outputs) const {
        std::vector<Table> parts;
        for (const auto* e : graph_.in_edges(i)) {
            const Table& from = e->from == source_node_id ? source : outputs.at(graph_.index_of(e->from));
            parts.push_back(e->column_subset ? select_subset(from, *e->column_subset) : from);
        }
        return Table::concat(parts);
    }

    static Table select_subset(const Table& t, const std::vector<std::string>& subset) {
        std::vector<Column> out;
        for (const auto& name : subset) {
            bool hit = false;
            for (const auto& c : t.columns())
                if (c.name == name || c.name.rfind(name + "=", 0) == 0) {
                    out.push_back(c);
                    hit = true;
                }
            if (!hit) throw Error(ErrorKind::unevaluable, "column subset names unknown column '" + name + "'");
        }
        return Table(std::move(out));
    }

    Column prediction_column(std::size_t i, const Matrix& proba) const {
        Column c{graph_.nodes()[i].id + ".prediction", ColumnKind::categorical, {}, class_labels_};
        for (int l : predict_labels(proba)) c.values.push_back(static_cast<double>(l));
        return c;
    }

    Table apply(std::size_t i, const Table& in) const {
        const auto& step = steps_[i];
        if (step.transformer) return step.transformer->transform(in);
        Table out = in;
        out.columns().push_back(prediction_column(i, step.classifier->predict_proba(in.to_matrix())));
        return Table(std::move(out.columns()));
    }

    /// Memoized evaluation of node `i`; entries pre-seeded in `memo` are taken as given.
    Table evaluate(std::size_t i, const Table& source, std::map<std::size_t, Table>& memo) const {
        if (auto it = memo.find(i); it != memo.end()) return it->second;
        for (const auto* e : graph_.in_edges(i))
            if (e->from != source_node_id) evaluate(graph_.index_of(e->from), source, memo);
        Table out = apply(i, route(i, source, memo));
        memo.emplace(i, out);
        return out;
    }

    Matrix predict_from_outputs(const Table& source, std::map<std::size_t, Table> memo) const {
        const auto sink = graph_.sink();
        for (const auto* e : graph_.in_edges(sink))
            if (e->from != source_node_id) evaluate(graph_.index_of(e->from), source, memo);
        Table in = route(sink, source, memo);
        Matrix p = steps_[sink].classifier->predict_proba(in.to_matrix());
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            const double s = p.row(r).sum();
            if (s > 0) p.row(r) /= s;
        }
        return p;
    }

    void fit(const Candidate& candidate, const Dataset& train, std::uint64_t seed) {
        steps_.resize(graph_.size());
        std::map<std::size_t, Table> outputs;
        for (auto i : graph_.topological_order()) {
            const auto& node = graph_.nodes()[i];
            models::PrimitiveParams params(candidate.config, node.config_key_prefix);
            Table in = route(i, train.features, outputs);
            const auto node_seed = derive_seed(seed, hash_string(node.id));
            if (models::classifier_primitives().count(node.primitive)) {
                steps_[i].classifier = models::make_classifier(node.primitive, params, node_seed);
                steps_[i].classifier->fit(in.to_matrix(), train.labels, class_labels_.size());
            } else {
                steps_[i].transformer = models::make_transformer(node.primitive, params);
                steps_[i].transformer->fit(in);
            }
            if (i != graph_.sink()) outputs.emplace(i, apply(i, in));
        }
    }

    std::string candidate_id_;
    PipelineGraph graph_;
    std::vector<std::string> class_labels_;
    Split split_;
    std::vector<Step> steps_;
    double fit_duration_ = 0.0;
    double predict_duration_ = 0.0;
};

/// Oracle over the output space of one pipeline node (which must dominate the sink).
class NodeOracle final : public PredictionOracle {
public:
    NodeOracle(std::shared_ptr<const FittedPipeline> pipeline, std::string node)
        : pipeline_(std::move(pipeline)), node_(std::move(node)) {
        if (!pipeline_->dominates_sink(node_))
            throw Error(ErrorKind::contract, "node '" + node_ + "' does not lie on every path to the sink");
    }
    std::size_t n_classes() const override { return pipeline_->n_classes(); }
    Matrix predict_proba(const Table& x) const override { return pipeline_->predict_from(node_, x); }

private:
    std::shared_ptr<const FittedPipeline> pipeline_;
    std::string node_;
};

/// Train and validation metrics of a refit pipeline; durations echo the recorded run values.
inline PerformanceReport report(const FittedPipeline& fp, const Dataset& data) {
    const Dataset train = data.select_rows(fp.split().train);
    const Dataset valid = data.select_rows(fp.split().validation);
    auto r = make_report(train.labels, predict_labels(fp.predict_proba(train.features)), valid.labels,
                         fp.predict_proba(valid.features), data.class_labels);
    r.fit_duration = fp.fit_duration();
    r.predict_duration = fp.predict_duration();
    return r;
}

}  // namespace runlens

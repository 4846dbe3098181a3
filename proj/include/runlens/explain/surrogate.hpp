#pragma once

#include <string>
#include <vector>

#include "../models/cart.hpp"
#include "../models/oracle.hpp"

namespace runlens {

struct SurrogateTree {
    models::ClassificationTree tree;
    std::vector<std::string> features;
    std::vector<std::string> classes;
    std::size_t max_leaf_nodes = 0;
    /// Share of rows where the surrogate reproduces the black-box label.
    double fidelity = 0.0;
    std::size_t rows = 0;
};

/// Labels of a fitted classification tree on a table's numeric view.
inline std::vector<int> tree_labels(const models::ClassificationTree& tree, const Table& x) {
    return predict_labels(tree.predict_values(x.to_matrix()));
}

/// CART mimicking the oracle's labels on `x`, grown best-first up to `max_leaf_nodes` leaves.
inline SurrogateTree global_surrogate(const PredictionOracle& oracle, const Table& x, std::size_t max_leaf_nodes,
                                      std::vector<std::string> class_labels = {}) {
    if (max_leaf_nodes < 2) throw Error(ErrorKind::contract, "max_leaf_nodes must be at least 2");
    if (x.rows() == 0) throw Error(ErrorKind::insufficient_data, "surrogate needs at least one row");
    const auto labels = predict_labels(oracle.predict_proba(x));
    models::TreeParams params;
    params.max_leaf_nodes = max_leaf_nodes;
    SurrogateTree s;
    s.tree.fit(x.to_matrix(), models::labels_as_targets(labels), oracle.n_classes(), params);
    s.features = x.names();
    if (class_labels.empty())
        for (std::size_t k = 0; k < oracle.n_classes(); ++k) class_labels.push_back(std::to_string(k));
    s.classes = std::move(class_labels);
    s.max_leaf_nodes = max_leaf_nodes;
    s.fidelity = accuracy(labels, tree_labels(s.tree, x));
    s.rows = x.rows();
    return s;
}

/// Portable tree document plus the fidelity summary.
inline json to_json(const SurrogateTree& s) {
    json j = models::tree_to_json(s.tree, s.features, s.classes);
    j["fidelity"] = s.fidelity;
    j["max_leaf_nodes"] = s.max_leaf_nodes;
    j["rows"] = s.rows;
    return j;
}

}  // namespace runlens

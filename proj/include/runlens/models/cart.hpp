#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "../common.hpp"

namespace runlens::models {

/// Gini impurity over class counts; leaf value is the class distribution.
struct GiniCriterion {
    struct Stats {
        std::vector<double> counts;
        double n = 0.0;

        void add(double y) {
            counts[static_cast<std::size_t>(y)] += 1.0;
            n += 1.0;
        }
        void remove(double y) {
            counts[static_cast<std::size_t>(y)] -= 1.0;
            n -= 1.0;
        }
        double impurity() const {
            if (n <= 0.0) return 0.0;
            double s = 0.0;
            for (double c : counts) s += (c / n) * (c / n);
            return 1.0 - s;
        }
    };

    static Stats make(std::size_t outputs) { return Stats{std::vector<double>(outputs, 0.0), 0.0}; }

    static std::vector<double> leaf_value(const Stats& s) {
        std::vector<double> v(s.counts.size(), 0.0);
        if (s.n > 0)
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.counts[i] / s.n;
        return v;
    }
};

/// Variance (mean squared error) impurity; leaf value is the mean target.
struct MseCriterion {
    struct Stats {
        double sum = 0.0, sum_sq = 0.0, n = 0.0;

        void add(double y) {
            sum += y;
            sum_sq += y * y;
            n += 1.0;
        }
        void remove(double y) {
            sum -= y;
            sum_sq -= y * y;
            n -= 1.0;
        }
        double impurity() const {
            if (n <= 0.0) return 0.0;
            const double m = sum / n;
            return std::max(0.0, sum_sq / n - m * m);
        }
    };

    static Stats make(std::size_t) { return {}; }
    static std::vector<double> leaf_value(const Stats& s) { return {s.n > 0 ? s.sum / s.n : 0.0}; }
};

struct TreeParams {
    int max_depth = -1;                 // -1: unlimited
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    std::size_t max_leaf_nodes = 0;     // 0: unlimited
    std::size_t max_features = 0;       // 0: all features
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> value;
    std::size_t samples = 0;
    double impurity = 0.0;
    int depth = 0;

    bool leaf() const { return feature < 0; }
};

/// Missing values (NaN) order below every observed value, so they always go left.
inline double split_key(double x) { return std::isnan(x) ? std::numeric_limits<double>::lowest() : x; }

/// CART with best-first growth. Splits are midpoints between consecutive distinct values
/// (`x <= threshold` goes left); ties prefer the lower feature index, then the lower threshold.
template <typename Criterion>
class DecisionTree {
public:
    DecisionTree() = default;

    /// `rows` selects (possibly repeated) training rows; empty means all rows.
    void fit(const Matrix& x, const std::vector<double>& y, std::size_t outputs, const TreeParams& params,
             std::vector<std::size_t> rows = {}) {
        if (static_cast<std::size_t>(x.rows()) != y.size())
            throw Error(ErrorKind::contract, "decision tree: row count mismatch");
        if (y.empty()) throw Error(ErrorKind::insufficient_data, "decision tree: no training rows");
        outputs_ = outputs;
        n_features_ = static_cast<std::size_t>(x.cols());
        nodes_.clear();
        if (rows.empty()) {
            rows.resize(y.size());
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        Rng rng(params.seed);

        struct Pending {
            double gain;
            std::size_t order;
            int node;
            Split split;
            std::vector<std::size_t> rows;
            bool operator<(const Pending& o) const {
                if (gain != o.gain) return gain < o.gain;
                return order > o.order;
            }
        };
        std::priority_queue<Pending> queue;
        std::size_t order = 0;
        std::size_t leaves = 1;

        auto make_node = [&](const std::vector<std::size_t>& r, int depth) {
            auto stats = Criterion::make(outputs_);
            for (auto i : r) stats.add(y[i]);
            TreeNode node;
            node.value = Criterion::leaf_value(stats);
            node.samples = r.size();
            node.impurity = stats.impurity();
            node.depth = depth;
            nodes_.push_back(std::move(node));
            return static_cast<int>(nodes_.size() - 1);
        };
        auto consider = [&](int id, std::vector<std::size_t> r) {
            const auto& node = nodes_[static_cast<std::size_t>(id)];
            if (r.size() < params.min_samples_split || r.size() < 2 * params.min_samples_leaf) return;
            if (params.max_depth >= 0 && node.depth >= params.max_depth) return;
            if (node.impurity <= 1e-15) return;
            auto split = best_split(x, y, r, params, rng);
            if (!split) return;
            queue.push({split->gain, order++, id, *split, std::move(r)});
        };

        const int root = make_node(rows, 0);
        consider(root, rows);
        while (!queue.empty()) {
            if (params.max_leaf_nodes > 0 && leaves >= params.max_leaf_nodes) break;
            Pending p = queue.top();
            queue.pop();
            std::vector<std::size_t> left, right;
            for (auto i : p.rows)
                (split_key(x(static_cast<Eigen::Index>(i), p.split.feature)) <= p.split.threshold ? left : right).push_back(i);
            const int depth = nodes_[static_cast<std::size_t>(p.node)].depth + 1;
            const int l = make_node(left, depth);
            const int r = make_node(right, depth);
            auto& node = nodes_[static_cast<std::size_t>(p.node)];
            node.feature = static_cast<int>(p.split.feature);
            node.threshold = p.split.threshold;
            node.left = l;
            node.right = r;
            ++leaves;
            consider(l, std::move(left));
            consider(r, std::move(right));
        }
    }

    template <typename Row>
    const std::vector<double>& leaf_value(const Row& row) const {
        return nodes_[static_cast<std::size_t>(leaf_index(row))].value;
    }

    template <typename Row>
    int leaf_index(const Row& row) const {
        int cur = 0;
        while (!nodes_[static_cast<std::size_t>(cur)].leaf()) {
            const auto& n = nodes_[static_cast<std::size_t>(cur)];
            cur = split_key(row(n.feature)) <= n.threshold ? n.left : n.right;
        }
        return cur;
    }

    Matrix predict_values(const Matrix& x) const {
        Matrix out(x.rows(), static_cast<Eigen::Index>(value_width()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto& v = leaf_value(x.row(i));
            for (std::size_t k = 0; k < v.size(); ++k) out(i, static_cast<Eigen::Index>(k)) = v[k];
        }
        return out;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& mutable_nodes() { return nodes_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t outputs() const { return outputs_; }
    void set_shape(std::size_t n_features, std::size_t outputs) {
        n_features_ = n_features;
        outputs_ = outputs;
    }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.leaf(); }));
    }

    int depth() const {
        int d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.depth);
        return d;
    }

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double gain = 0.0;
    };

    std::size_t value_width() const { return nodes_.empty() ? 1 : nodes_.front().value.size(); }

    std::optional<Split> best_split(const Matrix& x, const std::vector<double>& y, const std::vector<std::size_t>& rows,
                                    const TreeParams& params, Rng& rng) const {
        std::vector<std::size_t> features(n_features_);
        std::iota(features.begin(), features.end(), std::size_t{0});
        if (params.max_features > 0 && params.max_features < n_features_) {
            shuffle(features, rng);
            features.resize(params.max_features);
            std::sort(features.begin(), features.end());
        }
        auto parent = Criterion::make(outputs_);
        for (auto i : rows) parent.add(y[i]);
        const double n = static_cast<double>(rows.size());
        const double parent_cost = n * parent.impurity();

        std::optional<Split> best;
        std::vector<std::pair<double, std::size_t>> sorted(rows.size());
        for (auto f : features) {
            for (std::size_t k = 0; k < rows.size(); ++k)
                sorted[k] = {split_key(x(static_cast<Eigen::Index>(rows[k]), static_cast<Eigen::Index>(f))), rows[k]};
            std::sort(sorted.begin(), sorted.end());
            if (sorted.front().first == sorted.back().first) continue;
            auto left = Criterion::make(outputs_);
            auto right = parent;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                left.add(y[sorted[k].second]);
                right.remove(y[sorted[k].second]);
                if (sorted[k].first == sorted[k + 1].first) continue;
                if (k + 1 < params.min_samples_leaf || sorted.size() - k - 1 < params.min_samples_leaf) continue;
                const double cost = left.n * left.impurity() + right.n * right.impurity();
                const double gain = parent_cost - cost;
                if (!best || gain > best->gain + 1e-12) {
                    double thr = 0.5 * (sorted[k].first + sorted[k + 1].first);
                    if (sorted[k].first == std::numeric_limits<double>::lowest()) thr = sorted[k + 1].first - 1.0;
                    if (!(thr < sorted[k + 1].first)) thr = sorted[k].first;
                    best = Split{f, thr, gain};
                }
            }
        }
        return best;
    }

    std::vector<TreeNode> nodes_;
    std::size_t outputs_ = 0;
    std::size_t n_features_ = 0;
};

using ClassificationTree = DecisionTree<GiniCriterion>;
using RegressionTree = DecisionTree<MseCriterion>;

inline std::vector<double> labels_as_targets(const std::vector<int>& labels) {
    return {labels.begin(), labels.end()};
}

struct ForestParams {
    std::size_t n_estimators = 100;
    TreeParams tree;
    bool bootstrap = true;
    /// 0 selects sqrt(p) for classification and p for regression.
    std::size_t max_features = 0;
    std::uint64_t seed = 0;
};

/// Bagged trees with per-split feature subsampling; every tree gets its own derived seed.
template <typename Criterion>
class RandomForest {
public:
    void fit(const Matrix& x, const std::vector<double>& y, std::size_t outputs, const ForestParams& params) {
        trees_.clear();
        outputs_ = outputs;
        const auto p = static_cast<std::size_t>(x.cols());
        std::size_t max_features = params.max_features;
        if (max_features == 0)
            max_features = std::is_same_v<Criterion, GiniCriterion>
                               ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p)))))
                               : p;
        for (std::size_t t = 0; t < params.n_estimators; ++t) {
            TreeParams tp = params.tree;
            tp.max_features = max_features;
            tp.seed = derive_seed(params.seed, 2 * t + 1);
            std::vector<std::size_t> rows;
            if (params.bootstrap) {
                Rng rng(derive_seed(params.seed, 2 * t));
                rows.resize(y.size());
                for (auto& r : rows) r = uniform_index(rng, y.size());
            }
            DecisionTree<Criterion> tree;
            tree.fit(x, y, outputs, tp, std::move(rows));
            trees_.push_back(std::move(tree));
        }
    }

    /// Mean of the trees' leaf values (class distribution or regression mean).
    Matrix predict_values(const Matrix& x) const {
        Matrix out = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(width()));
        for (const auto& t : trees_) out += t.predict_values(x);
        if (!trees_.empty()) out /= static_cast<double>(trees_.size());
        return out;
    }

    const std::vector<DecisionTree<Criterion>>& trees() const { return trees_; }

private:
    std::size_t width() const {
        return std::is_same_v<Criterion, GiniCriterion> ? outputs_ : std::size_t{1};
    }

    std::vector<DecisionTree<Criterion>> trees_;
    std::size_t outputs_ = 0;
};

using RandomForestClassifier = RandomForest<GiniCriterion>;
using RandomForestRegressor = RandomForest<MseCriterion>;

/// Portable nested-JSON form of a classification tree.
inline json tree_to_json(const ClassificationTree& tree, const std::vector<std::string>& feature_names,
                         const std::vector<std::string>& class_labels) {
    const auto& nodes = tree.nodes();
    std::function<json(int)> rec = [&](int id) -> json {
        const auto& n = nodes[static_cast<std::size_t>(id)];
        json j{{"samples", n.samples}, {"impurity", n.impurity}, {"value", n.value}};
        if (n.leaf()) {
            auto cls = std::max_element(n.value.begin(), n.value.end()) - n.value.begin();
            j["class"] = class_labels.empty() ? json(cls) : json(class_labels[static_cast<std::size_t>(cls)]);
            return j;
        }
        j["feature"] = n.feature;
        j["feature_name"] = feature_names.empty() ? json(nullptr) : json(feature_names[static_cast<std::size_t>(n.feature)]);
        j["threshold"] = n.threshold;
        j["left"] = rec(n.left);
        j["right"] = rec(n.right);
        return j;
    };
    return {{"format", "runlens-tree/1"},
            {"features", feature_names},
            {"classes", class_labels},
            {"leaf_count", tree.leaf_count()},
            {"tree", nodes.empty() ? json(nullptr) : rec(0)}};
}

inline ClassificationTree tree_from_json(const json& doc) {
    if (doc.value("format", std::string()) != "runlens-tree/1")
        throw Error(ErrorKind::load, "unsupported tree format");
    ClassificationTree tree;
    auto& nodes = tree.mutable_nodes();
    std::function<int(const json&, int)> rec = [&](const json& j, int depth) -> int {
        TreeNode n;
        n.samples = j.at("samples").get<std::size_t>();
        n.impurity = j.at("impurity").get<double>();
        n.value = j.at("value").get<std::vector<double>>();
        n.depth = depth;
        nodes.push_back(n);
        const int id = static_cast<int>(nodes.size() - 1);
        if (j.contains("feature")) {
            const int l = rec(j.at("left"), depth + 1);
            const int r = rec(j.at("right"), depth + 1);
            auto& me = nodes[static_cast<std::size_t>(id)];
            me.feature = j.at("feature").get<int>();
            me.threshold = j.at("threshold").get<double>();
            me.left = l;
            me.right = r;
        }
        return id;
    };
    if (!doc.at("tree").is_null()) rec(doc.at("tree"), 0);
    const auto n_features = doc.at("features").size();
    const auto classes = doc.at("classes").size();
    tree.set_shape(n_features, classes ? classes : (nodes.empty() ? 0 : nodes.front().value.size()));
    return tree;
}

}  // namespace runlens::models

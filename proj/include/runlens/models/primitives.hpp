#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "../search_space.hpp"
#include "cart.hpp"
#include "oracle.hpp"

namespace runlens::models {

/// Hyperparameters of one primitive: the candidate config entries under the node's key prefix,
/// with the prefix stripped.
class PrimitiveParams {
public:
    PrimitiveParams() = default;
    PrimitiveParams(const Config& config, const std::string& prefix) {
        for (const auto& [k, v] : config)
            if (k.rfind(prefix, 0) == 0) values_.emplace(k.substr(prefix.size()), v);
    }

    double number(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (!is_numeric(it->second))
            throw Error(ErrorKind::unevaluable, "hyperparameter '" + key + "' must be numeric");
        return as_number(it->second);
    }

    long integer(const std::string& key, long fallback) const {
        return static_cast<long>(std::llround(number(key, static_cast<double>(fallback))));
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return value_to_string(it->second);
    }

private:
    std::map<std::string, Value> values_;
};

class Transformer {
public:
    virtual ~Transformer() = default;
    virtual void fit(const Table& x) = 0;
    virtual Table transform(const Table& x) const = 0;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) = 0;
    virtual Matrix predict_proba(const Matrix& x) const = 0;
};

// ---------------------------------------------------------------- transformers

class MeanImputer final : public Transformer {
public:
    void fit(const Table& x) override {
        fill_.assign(x.cols(), 0.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const auto& c = x.column(j);
            if (c.categorical()) continue;
            double s = 0.0;
            std::size_t n = 0;
            for (double v : c.values)
                if (!is_missing(v)) {
                    s += v;
                    ++n;
                }
            fill_[j] = n ? s / static_cast<double>(n) : 0.0;
        }
    }
    Table transform(const Table& x) const override {
        Table out = x;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            auto& c = out.column(j);
            if (c.categorical()) continue;
            for (double& v : c.values)
                if (is_missing(v)) v = fill_[j];
        }
        return out;
    }

private:
    std::vector<double> fill_;
};

class MostFrequentImputer final : public Transformer {
public:
    void fit(const Table& x) override {
        fill_.assign(x.cols(), 0.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            std::map<double, std::size_t> counts;
            for (double v : x.column(j).values)
                if (!is_missing(v)) counts[v]++;
            std::size_t best = 0;
            for (const auto& [v, n] : counts)
                if (n > best) {
                    best = n;
                    fill_[j] = v;
                }
        }
    }
    Table transform(const Table& x) const override {
        Table out = x;
        for (std::size_t j = 0; j < out.cols(); ++j)
            for (double& v : out.column(j).values)
                if (is_missing(v)) v = fill_[j];
        return out;
    }

private:
    std::vector<double> fill_;
};

class StandardScaler final : public Transformer {
public:
    void fit(const Table& x) override {
        mean_.assign(x.cols(), 0.0);
        scale_.assign(x.cols(), 1.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const auto& c = x.column(j);
            if (c.categorical()) continue;
            std::vector<double> present;
            for (double v : c.values)
                if (!is_missing(v)) present.push_back(v);
            if (present.empty()) continue;
            mean_[j] = mean(present);
            double ss = 0.0;
            for (double v : present) ss += (v - mean_[j]) * (v - mean_[j]);
            const double sd = std::sqrt(ss / static_cast<double>(present.size()));
            scale_[j] = sd > 0.0 ? sd : 1.0;
        }
    }
    Table transform(const Table& x) const override {
        Table out = x;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            auto& c = out.column(j);
            if (c.categorical()) continue;
            for (double& v : c.values)
                if (!is_missing(v)) v = (v - mean_[j]) / scale_[j];
        }
        return out;
    }

private:
    std::vector<double> mean_, scale_;
};

class MinMaxScaler final : public Transformer {
public:
    void fit(const Table& x) override {
        lo_.assign(x.cols(), 0.0);
        range_.assign(x.cols(), 1.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const auto& c = x.column(j);
            if (c.categorical()) continue;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (double v : c.values)
                if (!is_missing(v)) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            if (!std::isfinite(lo)) continue;
            lo_[j] = lo;
            range_[j] = hi > lo ? hi - lo : 1.0;
        }
    }
    Table transform(const Table& x) const override {
        Table out = x;
        for (std::size_t j = 0; j < out.cols(); ++j) {
            auto& c = out.column(j);
            if (c.categorical()) continue;
            for (double& v : c.values)
                if (!is_missing(v)) v = (v - lo_[j]) / range_[j];
        }
        return out;
    }

private:
    std::vector<double> lo_, range_;
};

/// Replaces each categorical column, in place, by one 0/1 column per vocabulary entry
/// ("name=value"); a missing cell encodes as all zeros.
class OneHotEncoder final : public Transformer {
public:
    void fit(const Table&) override {}
    Table transform(const Table& x) const override {
        std::vector<Column> out;
        for (const auto& c : x.columns()) {
            if (!c.categorical()) {
                out.push_back(c);
                continue;
            }
            for (std::size_t k = 0; k < c.vocabulary.size(); ++k) {
                Column ind{c.name + "=" + c.vocabulary[k], ColumnKind::numeric, {}, {}};
                ind.values.reserve(c.values.size());
                for (double v : c.values) ind.values.push_back(!is_missing(v) && static_cast<std::size_t>(v) == k ? 1.0 : 0.0);
                out.push_back(std::move(ind));
            }
        }
        return Table(std::move(out));
    }
};

/// Projects the numeric columns onto their leading principal components (pc1..pck, placed
/// first); categorical columns pass through. Each component's largest loading is positive.
class Pca final : public Transformer {
public:
    explicit Pca(std::size_t components) : requested_(components) {}

    void fit(const Table& x) override {
        numeric_.clear();
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (!x.column(j).categorical()) numeric_.push_back(j);
        Matrix m = numeric_matrix(x);
        if (m.array().isNaN().any()) throw Error(ErrorKind::unevaluable, "pca: missing values in input");
        const auto k = std::min<std::size_t>(requested_ == 0 ? numeric_.size() : requested_, numeric_.size());
        mean_ = m.colwise().mean().transpose();
        Matrix centered = m.rowwise() - mean_.transpose();
        Matrix cov = (centered.transpose() * centered) / std::max<double>(1.0, static_cast<double>(m.rows() - 1));
        Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
        components_ = Matrix(static_cast<Eigen::Index>(numeric_.size()), static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < k; ++c) {
            Vector v = solver.eigenvectors().col(static_cast<Eigen::Index>(numeric_.size() - 1 - c));
            Eigen::Index arg = 0;
            for (Eigen::Index i = 1; i < v.size(); ++i)
                if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
            if (v(arg) < 0) v = -v;
            components_.col(static_cast<Eigen::Index>(c)) = v;
        }
    }

    Table transform(const Table& x) const override {
        Matrix m = numeric_matrix(x);
        if (m.array().isNaN().any()) throw Error(ErrorKind::unevaluable, "pca: missing values in input");
        Matrix proj = (m.rowwise() - mean_.transpose()) * components_;
        std::vector<Column> out;
        for (Eigen::Index c = 0; c < proj.cols(); ++c) {
            Column col{"pc" + std::to_string(c + 1), ColumnKind::numeric, {}, {}};
            for (Eigen::Index i = 0; i < proj.rows(); ++i) col.values.push_back(proj(i, c));
            out.push_back(std::move(col));
        }
        for (const auto& c : x.columns())
            if (c.categorical()) out.push_back(c);
        Table t(std::move(out));
        return t;
    }

private:
    Matrix numeric_matrix(const Table& x) const {
        Matrix m(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(numeric_.size()));
        for (std::size_t j = 0; j < numeric_.size(); ++j)
            for (std::size_t i = 0; i < x.rows(); ++i)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x.column(numeric_[j]).values[i];
        return m;
    }

    std::size_t requested_;
    std::vector<std::size_t> numeric_;
    Vector mean_;
    Matrix components_;
};

// ---------------------------------------------------------------- classifiers

inline void require_complete(const Matrix& x, const std::string& who) {
    if (x.array().isNaN().any()) throw Error(ErrorKind::unevaluable, who + ": missing values in input");
}

class DecisionTreeClassifier final : public Classifier {
public:
    explicit DecisionTreeClassifier(TreeParams params) : params_(params) {}
    void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) override {
        tree_.fit(x, labels_as_targets(y), n_classes, params_);
    }
    Matrix predict_proba(const Matrix& x) const override { return tree_.predict_values(x); }
    const ClassificationTree& tree() const { return tree_; }

private:
    TreeParams params_;
    ClassificationTree tree_;
};

class RandomForestModel final : public Classifier {
public:
    explicit RandomForestModel(ForestParams params) : params_(params) {}
    void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) override {
        forest_.fit(x, labels_as_targets(y), n_classes, params_);
    }
    Matrix predict_proba(const Matrix& x) const override { return forest_.predict_values(x); }

private:
    ForestParams params_;
    RandomForestClassifier forest_;
};

/// Brute-force k-NN on Euclidean distance; equal distances keep training order.
class KNearestNeighbors final : public Classifier {
public:
    KNearestNeighbors(std::size_t k, bool distance_weighted) : k_(std::max<std::size_t>(1, k)), weighted_(distance_weighted) {}

    void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) override {
        require_complete(x, "k-nearest-neighbors");
        x_ = x;
        y_ = y;
        classes_ = n_classes;
    }

    Matrix predict_proba(const Matrix& x) const override {
        require_complete(x, "k-nearest-neighbors");
        const auto k = std::min<std::size_t>(k_, y_.size());
        Matrix out = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(classes_));
        std::vector<std::pair<double, std::size_t>> d(y_.size());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (std::size_t t = 0; t < y_.size(); ++t)
                d[t] = {(x_.row(static_cast<Eigen::Index>(t)) - x.row(i)).squaredNorm(), t};
            std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
            const bool exact = d.front().first == 0.0;
            for (std::size_t n = 0; n < k; ++n) {
                double w = 1.0;
                if (weighted_) {
                    if (exact) w = d[n].first == 0.0 ? 1.0 : 0.0;
                    else w = 1.0 / std::sqrt(d[n].first);
                }
                out(i, y_[d[n].second]) += w;
            }
            out.row(i) /= out.row(i).sum();
        }
        return out;
    }

private:
    std::size_t k_;
    bool weighted_;
    Matrix x_;
    std::vector<int> y_;
    std::size_t classes_ = 0;
};

/// Multinomial logistic regression by full-batch gradient descent on internally standardized
/// features (fixed epochs and learning rate), L2 penalty 1/(C n).
class LogisticRegression final : public Classifier {
public:
    LogisticRegression(double c, std::size_t epochs = 500, double learning_rate = 0.1)
        : c_(c), epochs_(epochs), lr_(learning_rate) {}

    void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) override {
        require_complete(x, "logistic-regression");
        classes_ = n_classes;
        mean_ = x.colwise().mean().transpose();
        scale_ = ((x.rowwise() - mean_.transpose()).array().square().colwise().mean()).sqrt().transpose();
        for (Eigen::Index j = 0; j < scale_.size(); ++j)
            if (!(scale_(j) > 0.0)) scale_(j) = 1.0;
        Matrix z = standardize(x);
        const auto n = static_cast<double>(x.rows());
        weights_ = Matrix::Zero(z.cols(), static_cast<Eigen::Index>(n_classes));
        bias_ = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n_classes));
        Matrix onehot = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(n_classes));
        for (std::size_t i = 0; i < y.size(); ++i) onehot(static_cast<Eigen::Index>(i), y[i]) = 1.0;
        const double l2 = c_ > 0.0 ? 1.0 / (c_ * n) : 0.0;
        for (std::size_t epoch = 0; epoch < epochs_; ++epoch) {
            Matrix p = softmax((z * weights_).rowwise() + bias_);
            Matrix err = (p - onehot) / n;
            weights_ -= lr_ * (z.transpose() * err + l2 * weights_);
            bias_ -= lr_ * err.colwise().sum();
        }
    }

    Matrix predict_proba(const Matrix& x) const override {
        require_complete(x, "logistic-regression");
        return softmax((standardize(x) * weights_).rowwise() + bias_);
    }

private:
    Matrix standardize(const Matrix& x) const {
        return (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
    }

    static Matrix softmax(Matrix logits) {
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            logits.row(i).array() -= logits.row(i).maxCoeff();
            logits.row(i) = logits.row(i).array().exp().matrix();
            logits.row(i) /= logits.row(i).sum();
        }
        return logits;
    }

    double c_;
    std::size_t epochs_;
    double lr_;
    std::size_t classes_ = 0;
    Vector mean_, scale_;
    Matrix weights_;
    Eigen::RowVectorXd bias_;
};

class GaussianNaiveBayes final : public Classifier {
public:
    explicit GaussianNaiveBayes(double var_smoothing) : smoothing_(var_smoothing) {}

    void fit(const Matrix& x, const std::vector<int>& y, std::size_t n_classes) override {
        require_complete(x, "gaussian-naive-bayes");
        const auto p = x.cols();
        const auto k = static_cast<Eigen::Index>(n_classes);
        means_ = Matrix::Zero(k, p);
        vars_ = Matrix::Zero(k, p);
        log_prior_ = Vector::Constant(k, -std::numeric_limits<double>::infinity());
        std::vector<double> count(n_classes, 0.0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            means_.row(y[i]) += x.row(static_cast<Eigen::Index>(i));
            count[static_cast<std::size_t>(y[i])] += 1.0;
        }
        for (Eigen::Index c = 0; c < k; ++c)
            if (count[static_cast<std::size_t>(c)] > 0) means_.row(c) /= count[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < y.size(); ++i)
            vars_.row(y[i]) += (x.row(static_cast<Eigen::Index>(i)) - means_.row(y[i])).array().square().matrix();
        double max_var = 0.0;
        if (x.rows() > 0) {
            Eigen::RowVectorXd mu = x.colwise().mean();
            max_var = ((x.rowwise() - mu).array().square().colwise().mean()).maxCoeff();
        }
        const double eps = smoothing_ * std::max(max_var, 1e-300);
        for (Eigen::Index c = 0; c < k; ++c) {
            const double n = count[static_cast<std::size_t>(c)];
            if (n > 0) {
                vars_.row(c) /= n;
                log_prior_(c) = std::log(n / static_cast<double>(y.size()));
            }
            vars_.row(c).array() += eps;
        }
    }

    Matrix predict_proba(const Matrix& x) const override {
        require_complete(x, "gaussian-naive-bayes");
        Matrix out(x.rows(), means_.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index c = 0; c < means_.rows(); ++c) {
                double lp = log_prior_(c);
                if (std::isfinite(lp))
                    for (Eigen::Index j = 0; j < x.cols(); ++j) {
                        const double v = vars_(c, j);
                        const double d = x(i, j) - means_(c, j);
                        lp += -0.5 * std::log(2.0 * M_PI * v) - 0.5 * d * d / v;
                    }
                out(i, c) = lp;
            }
            const double m = out.row(i).maxCoeff();
            out.row(i) = (out.row(i).array() - m).exp().matrix();
            out.row(i) /= out.row(i).sum();
        }
        return out;
    }

private:
    double smoothing_;
    Matrix means_, vars_;
    Vector log_prior_;
};

// ---------------------------------------------------------------- registry

inline const std::set<std::string>& transformer_primitives() {
    static const std::set<std::string> names{"mean-imputer", "most-frequent-imputer", "standard-scaler",
                                             "min-max-scaler", "one-hot-encoder", "pca"};
    return names;
}

inline const std::set<std::string>& classifier_primitives() {
    static const std::set<std::string> names{"decision-tree", "random-forest", "k-nearest-neighbors",
                                             "logistic-regression", "gaussian-naive-bayes"};
    return names;
}

inline bool is_supported_primitive(const std::string& name) {
    return transformer_primitives().count(name) || classifier_primitives().count(name);
}

inline std::unique_ptr<Transformer> make_transformer(const std::string& name, const PrimitiveParams& p) {
    if (name == "mean-imputer") return std::make_unique<MeanImputer>();
    if (name == "most-frequent-imputer") return std::make_unique<MostFrequentImputer>();
    if (name == "standard-scaler") return std::make_unique<StandardScaler>();
    if (name == "min-max-scaler") return std::make_unique<MinMaxScaler>();
    if (name == "one-hot-encoder") return std::make_unique<OneHotEncoder>();
    if (name == "pca") return std::make_unique<Pca>(static_cast<std::size_t>(std::max(1L, p.integer("n_components", 2))));
    throw Error(ErrorKind::unsupported_primitive, "'" + name + "' is not a transformer");
}

inline TreeParams tree_params(const PrimitiveParams& p, std::uint64_t seed) {
    TreeParams t;
    t.max_depth = static_cast<int>(p.integer("max_depth", -1));
    t.min_samples_split = static_cast<std::size_t>(std::max(2L, p.integer("min_samples_split", 2)));
    t.min_samples_leaf = static_cast<std::size_t>(std::max(1L, p.integer("min_samples_leaf", 1)));
    t.max_leaf_nodes = static_cast<std::size_t>(std::max(0L, p.integer("max_leaf_nodes", 0)));
    t.seed = seed;
    return t;
}

inline std::unique_ptr<Classifier> make_classifier(const std::string& name, const PrimitiveParams& p, std::uint64_t seed) {
    if (name == "decision-tree") return std::make_unique<DecisionTreeClassifier>(tree_params(p, seed));
    if (name == "random-forest") {
        ForestParams f;
        f.n_estimators = static_cast<std::size_t>(std::max(1L, p.integer("n_estimators", 50)));
        f.tree = tree_params(p, seed);
        f.seed = seed;
        return std::make_unique<RandomForestModel>(f);
    }
    if (name == "k-nearest-neighbors")
        return std::make_unique<KNearestNeighbors>(static_cast<std::size_t>(std::max(1L, p.integer("n_neighbors", 5))),
                                                   p.text("weights", "uniform") == "distance");
    if (name == "logistic-regression") return std::make_unique<LogisticRegression>(p.number("C", 1.0));
    if (name == "gaussian-naive-bayes") return std::make_unique<GaussianNaiveBayes>(p.number("var_smoothing", 1e-9));
    throw Error(ErrorKind::unsupported_primitive, "'" + name + "' is not a classifier");
}

}  // namespace runlens::models

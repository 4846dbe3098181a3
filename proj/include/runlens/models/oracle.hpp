#pragma once

#include <functional>
#include <utility>

#include "../dataset.hpp"

namespace runlens {

/// Anything that maps feature rows to class probabilities.
class PredictionOracle {
public:
    virtual ~PredictionOracle() = default;
    virtual std::size_t n_classes() const = 0;
    /// One row per input record, one column per class; rows sum to 1.
    virtual Matrix predict_proba(const Table& x) const = 0;
};

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(const Eigen::Ref<const Vector>& row) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < row.size(); ++k)
        if (row(k) > row(best)) best = k;
    return static_cast<int>(best);
}

inline std::vector<int> predict_labels(const Matrix& proba) {
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax(proba.row(i).transpose());
    return out;
}

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predicted[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Wraps a callable `Matrix(const Table&)`; used for synthetic black boxes.
class FunctionOracle final : public PredictionOracle {
public:
    using Fn = std::function<Matrix(const Table&)>;
    FunctionOracle(std::size_t classes, Fn fn) : classes_(classes), fn_(std::move(fn)) {}

    std::size_t n_classes() const override { return classes_; }
    Matrix predict_proba(const Table& x) const override { return fn_(x); }

private:
    std::size_t classes_;
    Fn fn_;
};

/// Binary oracle from a per-row probability of class 1 over the numeric view of the table.
inline FunctionOracle binary_oracle(std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)> p1) {
    return FunctionOracle(2, [p1 = std::move(p1)](const Table& t) {
        Matrix x = t.to_matrix();
        Matrix out(x.rows(), 2);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double p = p1(x.row(i));
            out(i, 0) = 1.0 - p;
            out(i, 1) = p;
        }
        return out;
    });
}

}  // namespace runlens

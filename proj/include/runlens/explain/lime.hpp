#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "../models/oracle.hpp"

namespace runlens {

struct LimeOptions {
    std::size_t n_samples = 1000;
    /// 0 selects 0.75 * sqrt(number of features).
    double kernel_width = 0.0;
    /// Class whose probability is explained; defaults to the black box's prediction.
    std::optional<int> target_class;
    std::uint64_t seed = 0;
};

struct LocalExplanation {
    std::size_t row = 0;
    std::vector<double> probabilities;
    int target_class = 0;
    std::vector<std::string> features;
    std::vector<double> weights;
    double intercept = 0.0;
    /// Weighted R^2 of the local linear fit.
    double score = 0.0;
    double kernel_width = 0.0;
    std::size_t n_samples = 0;
};

/// LIME for tabular data. Numeric features are perturbed with Gaussian noise scaled by the
/// column sd and enter the linear model standardized; categorical features are resampled from
/// the column and enter as "same as the instance" indicators.
inline LocalExplanation local_surrogate(const PredictionOracle& oracle, const Table& data, std::size_t row,
                                        const LimeOptions& opt = {}) {
    if (row >= data.rows()) throw Error(ErrorKind::not_found, "row " + std::to_string(row) + " does not exist");
    if (opt.n_samples < 2) throw Error(ErrorKind::contract, "local surrogate needs at least 2 samples");
    const auto p = data.cols();
    const auto n = opt.n_samples;

    std::vector<double> sd(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& c = data.column(j);
        if (c.categorical()) continue;
        std::vector<double> present;
        for (double v : c.values)
            if (!is_missing(v)) present.push_back(v);
        if (present.size() > 1) {
            const double m = mean(present);
            double ss = 0.0;
            for (double v : present) ss += (v - m) * (v - m);
            sd[j] = std::sqrt(ss / static_cast<double>(present.size()));
        }
    }

    // Sample 0 is the instance itself.
    Rng rng(opt.seed);
    std::vector<Column> cols;
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
        const auto& c = data.column(j);
        Column out{c.name, c.kind, std::vector<double>(n), c.vocabulary};
        const double x0 = c.values[row];
        out.values[0] = x0;
        if (c.categorical()) z(0, static_cast<Eigen::Index>(j)) = 1.0;
        for (std::size_t s = 1; s < n; ++s) {
            if (c.categorical()) {
                const double v = c.values[uniform_index(rng, data.rows())];
                out.values[s] = v;
                z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = v == x0 || (is_missing(v) && is_missing(x0)) ? 1.0 : 0.0;
            } else {
                const double e = standard_normal(rng);
                if (is_missing(x0) || sd[j] == 0.0) {
                    out.values[s] = x0;
                } else {
                    out.values[s] = x0 + e * sd[j];
                    z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = e;
                }
            }
        }
        cols.push_back(std::move(out));
    }
    Table samples(std::move(cols));
    const Matrix proba = oracle.predict_proba(samples);

    LocalExplanation ex;
    ex.row = row;
    for (Eigen::Index k = 0; k < proba.cols(); ++k) ex.probabilities.push_back(proba(0, k));
    ex.target_class = opt.target_class ? *opt.target_class : argmax(proba.row(0).transpose());
    if (ex.target_class < 0 || ex.target_class >= proba.cols())
        throw Error(ErrorKind::contract, "target class out of range");
    ex.features = data.names();
    ex.n_samples = n;
    const Vector y = proba.col(ex.target_class);

    // Distances in the interpretable space: categorical mismatch counts 1.
    Vector d2(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double v = z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
            acc += data.column(j).categorical() ? (1.0 - v) : v * v;
        }
        d2(static_cast<Eigen::Index>(s)) = acc;
    }

    double width = opt.kernel_width > 0 ? opt.kernel_width : 0.75 * std::sqrt(static_cast<double>(std::max<std::size_t>(p, 1)));
    Vector w;
    for (int attempt = 0;; ++attempt) {
        w = (-d2.array() / (width * width)).exp().sqrt().matrix();
        const double neighbours = w.sum() - w(0);
        if (neighbours > 1e-12 * static_cast<double>(n)) break;
        if (attempt == 3) throw Error(ErrorKind::degenerate, "local surrogate kernel assigns no weight to the neighbourhood");
        width *= 2.0;
    }
    ex.kernel_width = width;

    // Weighted least squares with intercept; a tiny ridge keeps constant columns solvable.
    Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
    a.col(0).setOnes();
    a.rightCols(static_cast<Eigen::Index>(p)) = z;
    Matrix aw = a.array().colwise() * w.array();
    Matrix normal = a.transpose() * aw;
    for (Eigen::Index j = 1; j < normal.rows(); ++j) normal(j, j) += 1e-8 * w.sum();
    Vector beta = normal.ldlt().solve(aw.transpose() * y);
    ex.intercept = beta(0);
    for (std::size_t j = 0; j < p; ++j) ex.weights.push_back(beta(static_cast<Eigen::Index>(j + 1)));

    const Vector fitted = a * beta;
    const double wy = (w.array() * y.array()).sum() / w.sum();
    const double ss_res = (w.array() * (y - fitted).array().square()).sum();
    const double ss_tot = (w.array() * (y.array() - wy).square()).sum();
    ex.score = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return ex;
}

inline json to_json(const LocalExplanation& e) {
    json weights = json::array();
    for (std::size_t j = 0; j < e.features.size(); ++j) weights.push_back({{"feature", e.features[j]}, {"weight", e.weights[j]}});
    return {{"row", e.row},
            {"probabilities", e.probabilities},
            {"target_class", e.target_class},
            {"weights", weights},
            {"intercept", e.intercept},
            {"score", e.score},
            {"kernel_width", e.kernel_width},
            {"n_samples", e.n_samples}};
}

}  // namespace runlens

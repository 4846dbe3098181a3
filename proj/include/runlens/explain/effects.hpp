#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "../models/oracle.hpp"

namespace runlens {

struct EffectsOptions {
    std::size_t n_repeats = 5;
    std::size_t grid_size = 20;
    /// Class whose probability the PDP/ICE curves show.
    int target_class = 0;
    std::uint64_t seed = 0;
};

struct PermutationImportance {
    std::string feature;
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> drops;
};

struct FeatureCurve {
    std::string feature;
    bool categorical = false;
    std::vector<double> grid;  // raw values (categorical: vocabulary codes)
    std::vector<std::string> grid_labels;
    /// pdp[class][k]
    std::vector<std::vector<double>> pdp;
    /// ice[row][k] for the target class
    std::vector<std::vector<double>> ice;
};

struct FeatureEffects {
    double baseline_accuracy = 0.0;
    int target_class = 0;
    std::vector<PermutationImportance> importance;
    std::vector<FeatureCurve> curves;
};

/// Accuracy drop when one column is shuffled, over seeded repeats.
inline std::vector<PermutationImportance> permutation_importance(const PredictionOracle& oracle, const Table& x,
                                                                 const std::vector<int>& y, std::size_t n_repeats,
                                                                 std::uint64_t seed, double* baseline = nullptr) {
    const double base = accuracy(y, predict_labels(oracle.predict_proba(x)));
    if (baseline) *baseline = base;
    std::vector<PermutationImportance> out;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        PermutationImportance pi;
        pi.feature = x.column(j).name;
        for (std::size_t r = 0; r < n_repeats; ++r) {
            Table shuffled = x;
            Rng rng(derive_seed(seed, j * 1000003 + r));
            shuffle(shuffled.column(j).values, rng);
            pi.drops.push_back(base - accuracy(y, predict_labels(oracle.predict_proba(shuffled))));
        }
        pi.mean = mean(pi.drops);
        pi.sd = stddev(pi.drops);
        out.push_back(std::move(pi));
    }
    return out;
}

/// Quantile grid of the observed values (duplicates dropped), or every vocabulary code.
inline std::vector<double> effect_grid(const Column& c, std::size_t grid_size) {
    std::vector<double> out;
    if (c.categorical()) {
        for (std::size_t k = 0; k < c.vocabulary.size(); ++k) out.push_back(static_cast<double>(k));
        return out;
    }
    std::vector<double> v;
    for (double x : c.values)
        if (!is_missing(x)) v.push_back(x);
    if (v.empty() || grid_size == 0) return out;
    std::sort(v.begin(), v.end());
    for (std::size_t k = 0; k < grid_size; ++k) {
        const double q = grid_size == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(grid_size - 1);
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        const double val = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
        if (out.empty() || val != out.back()) out.push_back(val);
    }
    return out;
}

/// Class probabilities with `feature` forced to `value` on every row: one Matrix per call.
inline Matrix forced_proba(const PredictionOracle& oracle, const Table& x, std::size_t feature, double value) {
    Table t = x;
    std::fill(t.column(feature).values.begin(), t.column(feature).values.end(), value);
    return oracle.predict_proba(t);
}

/// Partial dependence of class `cls` on one feature at one value.
inline double partial_dependence(const PredictionOracle& oracle, const Table& x, const std::string& feature, double value,
                                 int cls) {
    const auto idx = x.find(feature);
    if (!idx) throw Error(ErrorKind::not_found, "unknown feature '" + feature + "'");
    return forced_proba(oracle, x, *idx, value).col(cls).mean();
}

inline FeatureCurve feature_curve(const PredictionOracle& oracle, const Table& x, std::size_t feature,
                                  std::size_t grid_size, int target_class) {
    const auto& col = x.column(feature);
    FeatureCurve c;
    c.feature = col.name;
    c.categorical = col.categorical();
    c.grid = effect_grid(col, grid_size);
    for (double g : c.grid) c.grid_labels.push_back(col.categorical() ? col.vocabulary[static_cast<std::size_t>(g)] : format_number(g));
    c.pdp.assign(oracle.n_classes(), std::vector<double>(c.grid.size(), 0.0));
    c.ice.assign(x.rows(), std::vector<double>(c.grid.size(), 0.0));
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        const Matrix p = forced_proba(oracle, x, feature, c.grid[k]);
        for (std::size_t cls = 0; cls < oracle.n_classes(); ++cls) c.pdp[cls][k] = p.col(static_cast<Eigen::Index>(cls)).mean();
        for (std::size_t r = 0; r < x.rows(); ++r) c.ice[r][k] = p(static_cast<Eigen::Index>(r), target_class);
    }
    return c;
}

inline FeatureEffects feature_effects(const PredictionOracle& oracle, const Table& x, const std::vector<int>& y,
                                     const EffectsOptions& opt = {}) {
    if (opt.target_class < 0 || static_cast<std::size_t>(opt.target_class) >= oracle.n_classes())
        throw Error(ErrorKind::contract, "target class out of range");
    FeatureEffects fe;
    fe.target_class = opt.target_class;
    fe.importance = permutation_importance(oracle, x, y, opt.n_repeats, opt.seed, &fe.baseline_accuracy);
    for (std::size_t j = 0; j < x.cols(); ++j) fe.curves.push_back(feature_curve(oracle, x, j, opt.grid_size, opt.target_class));
    return fe;
}

/// ICE curves are truncated to the first `max_ice_rows` rows; the PDP always covers every row.
inline json to_json(const FeatureEffects& fe, std::size_t max_ice_rows = 50) {
    json imp = json::array();
    for (const auto& p : fe.importance) imp.push_back({{"feature", p.feature}, {"mean", p.mean}, {"sd", p.sd}, {"drops", p.drops}});
    json curves = json::array();
    for (const auto& c : fe.curves) {
        const auto n = std::min(max_ice_rows, c.ice.size());
        curves.push_back({{"feature", c.feature},
                          {"categorical", c.categorical},
                          {"grid", c.grid},
                          {"grid_labels", c.grid_labels},
                          {"pdp", c.pdp},
                          {"ice", std::vector<std::vector<double>>(c.ice.begin(), c.ice.begin() + static_cast<long>(n))},
                          {"ice_rows_total", c.ice.size()}});
    }
    return {{"baseline_accuracy", fe.baseline_accuracy},
            {"target_class", fe.target_class},
            {"permutation_importance", imp},
            {"curves", curves}};
}

inline std::string permutation_importance_to_csv(const std::vector<PermutationImportance>& imp) {
    std::string out = "feature,mean,sd\n";
    for (const auto& p : imp) out += csv::escape(p.feature) + "," + format_number(p.mean) + "," + format_number(p.sd) + "\n";
    return out;
}

}  // namespace runlens

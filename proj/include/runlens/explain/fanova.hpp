#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "../models/cart.hpp"
#include "../run_history.hpp"

namespace runlens {

struct FanovaOptions {
    std::size_t n_trees = 32;
    std::size_t curve_points = 20;
    std::size_t min_candidates = 10;
    std::uint64_t seed = 0;
    /// Restrict to candidates whose pipeline equals this candidate's pipeline.
    std::optional<std::string> structure_of;
};

struct MarginalCurve {
    std::vector<Value> values;
    std::vector<double> performance;
    std::vector<double> sd;  // spread across trees
};

struct SingleImportance {
    std::string hyperparameter;
    double importance = 0.0;
    double sd = 0.0;
    MarginalCurve curve;
};

struct PairImportance {
    std::string first, second;
    double importance = 0.0;
    std::vector<Value> first_values, second_values;
    /// grid[i][j]: mean marginal performance at (first_values[i], second_values[j]).
    std::vector<std::vector<double>> grid;
};

struct ImportanceTable {
    std::vector<SingleImportance> singles;  // by importance, descending
    std::vector<PairImportance> pairs;      // by importance, descending
    std::size_t n_candidates = 0;
    std::size_t n_trees = 0;
    std::size_t trees_with_variance = 0;
};

namespace detail {

/// Hyperparameter value on the regression axis: numeric values map to [0,1] (log domain for
/// log-scale axes), categorical values to their choice index.
inline double fanova_encode(const Hyperparameter& hp, const Value& v) {
    if (!hp.numeric()) return static_cast<double>(hp.choice_index(as_string(v)));
    const double x = as_number(v);
    if (hp.log_scale) return (std::log(x) - std::log(hp.lower)) / (std::log(hp.upper) - std::log(hp.lower));
    return (x - hp.lower) / (hp.upper - hp.lower);
}

inline std::pair<double, double> fanova_domain(const Hyperparameter& hp) {
    if (!hp.numeric()) return {-0.5, static_cast<double>(hp.choices.size()) - 0.5};
    return {0.0, 1.0};
}

/// Evaluation positions for curves: evenly spaced on the encoded axis (integers rounded,
/// duplicates dropped), or every choice.
inline std::vector<std::pair<double, Value>> fanova_axis(const Hyperparameter& hp, std::size_t points) {
    std::vector<std::pair<double, Value>> out;
    if (!hp.numeric()) {
        for (std::size_t k = 0; k < hp.choices.size(); ++k) out.emplace_back(static_cast<double>(k), hp.choices[k]);
        return out;
    }
    for (std::size_t k = 0; k < points; ++k) {
        const double u = points == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(points - 1);
        double x = hp.log_scale ? std::exp(std::log(hp.lower) + u * (std::log(hp.upper) - std::log(hp.lower)))
                                : hp.lower + u * (hp.upper - hp.lower);
        x = std::clamp(x, hp.lower, hp.upper);
        if (hp.kind == HpKind::integer) x = std::round(x);
        if (!out.empty() && is_numeric(out.back().second) && as_number(out.back().second) == x) continue;
        out.emplace_back(fanova_encode(hp, x), x);
    }
    return out;
}

/// Exact functional-ANOVA marginals of one regression tree under the uniform measure on the
/// box domain.
class TreeMarginals {
public:
    TreeMarginals(const models::RegressionTree& tree, const std::vector<std::pair<double, double>>& domain)
        : domain_(domain), p_(domain.size()), cuts_(domain.size()) {
        collect(tree, 0, std::vector<double>(p_), std::vector<double>(p_), true);
        for (std::size_t d = 0; d < p_; ++d) {
            cuts_[d].push_back(domain_[d].first);
            cuts_[d].push_back(domain_[d].second);
            std::sort(cuts_[d].begin(), cuts_[d].end());
            cuts_[d].erase(std::unique(cuts_[d].begin(), cuts_[d].end()), cuts_[d].end());
        }
        mean_ = 0.0;
        for (const auto& l : leaves_) mean_ += l.volume * l.value;
        variance_ = 0.0;
        for (const auto& l : leaves_) variance_ += l.volume * (l.value - mean_) * (l.value - mean_);
    }

    double mean() const { return mean_; }
    double variance() const { return variance_; }

    /// Marginal over dimension d, one value per interval between consecutive cut points.
    std::vector<double> single(std::size_t d) const {
        const auto n = cuts_[d].size() - 1;
        std::vector<double> diff(n + 1, 0.0);
        for (const auto& l : leaves_) {
            const double c = l.value * l.volume / l.frac[d];
            diff[index(d, l.lo[d])] += c;
            diff[index(d, l.hi[d])] -= c;
        }
        std::vector<double> out(n);
        double run = 0.0;
        for (std::size_t k = 0; k < n; ++k) out[k] = run += diff[k];
        return out;
    }

    double single_variance(std::size_t d, const std::vector<double>& marginal) const {
        double v = 0.0;
        for (std::size_t k = 0; k < marginal.size(); ++k)
            v += width(d, k) * (marginal[k] - mean_) * (marginal[k] - mean_);
        return v;
    }

    /// Joint marginal over (a, b) on the product of their intervals, row-major in a.
    std::vector<double> pair(std::size_t a, std::size_t b) const {
        const auto na = cuts_[a].size() - 1, nb = cuts_[b].size() - 1;
        std::vector<double> diff((na + 1) * (nb + 1), 0.0);
        for (const auto& l : leaves_) {
            const double c = l.value * l.volume / (l.frac[a] * l.frac[b]);
            const auto a0 = index(a, l.lo[a]), a1 = index(a, l.hi[a]);
            const auto b0 = index(b, l.lo[b]), b1 = index(b, l.hi[b]);
            diff[a0 * (nb + 1) + b0] += c;
            diff[a0 * (nb + 1) + b1] -= c;
            diff[a1 * (nb + 1) + b0] -= c;
            diff[a1 * (nb + 1) + b1] += c;
        }
        for (std::size_t i = 0; i <= na; ++i)
            for (std::size_t j = 1; j <= nb; ++j) diff[i * (nb + 1) + j] += diff[i * (nb + 1) + j - 1];
        for (std::size_t i = 1; i <= na; ++i)
            for (std::size_t j = 0; j <= nb; ++j) diff[i * (nb + 1) + j] += diff[(i - 1) * (nb + 1) + j];
        std::vector<double> out(na * nb);
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] = diff[i * (nb + 1) + j];
        return out;
    }

    double pair_variance(std::size_t a, std::size_t b, const std::vector<double>& joint) const {
        const auto na = cuts_[a].size() - 1, nb = cuts_[b].size() - 1;
        double v = 0.0;
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = 0; j < nb; ++j) {
                const double e = joint[i * nb + j] - mean_;
                v += width(a, i) * width(b, j) * e * e;
            }
        return v;
    }

    /// Interval of dimension d containing the encoded position x.
    std::size_t locate(std::size_t d, double x) const {
        const auto& c = cuts_[d];
        auto it = std::lower_bound(c.begin(), c.end(), x);
        std::size_t k = it == c.begin() ? 0 : static_cast<std::size_t>(it - c.begin()) - 1;
        return std::min(k, c.size() - 2);
    }

    std::size_t intervals(std::size_t d) const { return cuts_[d].size() - 1; }

private:
    struct Leaf {
        std::vector<double> lo, hi, frac;
        double volume = 1.0;
        double value = 0.0;
    };

    void collect(const models::RegressionTree& tree, int id, std::vector<double> lo, std::vector<double> hi, bool root) {
        if (root)
            for (std::size_t d = 0; d < p_; ++d) {
                lo[d] = domain_[d].first;
                hi[d] = domain_[d].second;
            }
        const auto& n = tree.nodes()[static_cast<std::size_t>(id)];
        if (n.leaf()) {
            Leaf l{lo, hi, std::vector<double>(p_), 1.0, n.value[0]};
            for (std::size_t d = 0; d < p_; ++d) {
                l.frac[d] = (hi[d] - lo[d]) / (domain_[d].second - domain_[d].first);
                l.volume *= l.frac[d];
            }
            if (l.volume > 0.0) leaves_.push_back(std::move(l));
            return;
        }
        const auto f = static_cast<std::size_t>(n.feature);
        const double t = std::clamp(n.threshold, lo[f], hi[f]);
        cuts_[f].push_back(t);
        auto left_hi = hi;
        left_hi[f] = t;
        collect(tree, n.left, lo, left_hi, false);
        auto right_lo = lo;
        right_lo[f] = t;
        collect(tree, n.right, right_lo, hi, false);
    }

    std::size_t index(std::size_t d, double x) const {
        return static_cast<std::size_t>(std::lower_bound(cuts_[d].begin(), cuts_[d].end(), x) - cuts_[d].begin());
    }

    double width(std::size_t d, std::size_t k) const {
        return (cuts_[d][k + 1] - cuts_[d][k]) / (domain_[d].second - domain_[d].first);
    }

    std::vector<std::pair<double, double>> domain_;
    std::size_t p_;
    std::vector<std::vector<double>> cuts_;
    std::vector<Leaf> leaves_;
    double mean_ = 0.0, variance_ = 0.0;
};

}  // namespace detail

/// Variance decomposition of validation performance over the merged search space
/// (singles and pairs), estimated from a seeded random forest on padded configurations.
inline ImportanceTable hp_importance(const RunHistory& history, const FanovaOptions& opt = {}) {
    const auto& hps = history.merged_space.hyperparameters();
    const PipelineGraph* structure = nullptr;
    if (opt.structure_of) structure = &history.candidate(*opt.structure_of).pipeline;

    std::vector<const Candidate*> rows;
    for (const auto* c : history.ordered_candidates()) {
        if (!c->scored()) continue;
        if (structure && (c->pipeline.nodes() != structure->nodes() || c->pipeline.edges() != structure->edges())) continue;
        rows.push_back(c);
    }
    if (rows.size() < opt.min_candidates)
        throw Error(ErrorKind::insufficient_data, "hyperparameter importance needs at least " +
                                                      std::to_string(opt.min_candidates) + " scored candidates, found " +
                                                      std::to_string(rows.size()));
    const auto p = hps.size();
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    std::vector<double> y;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto cfg = pad_with_defaults(rows[i]->config, history.merged_space);
        for (std::size_t d = 0; d < p; ++d)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = detail::fanova_encode(hps[d], cfg.at(hps[d].name));
        y.push_back(*rows[i]->validation_performance);
    }

    ImportanceTable table;
    table.n_candidates = rows.size();
    table.n_trees = opt.n_trees;
    std::vector<std::pair<double, double>> domain;
    std::vector<std::vector<std::pair<double, Value>>> axes;
    for (const auto& hp : hps) {
        domain.push_back(detail::fanova_domain(hp));
        axes.push_back(detail::fanova_axis(hp, opt.curve_points));
    }

    std::vector<std::vector<double>> single_frac(p);
    std::vector<std::vector<std::vector<double>>> curves(p);  // [hp][point] -> per-tree values
    for (std::size_t d = 0; d < p; ++d) curves[d].resize(axes[d].size());
    std::vector<std::vector<double>> pair_frac(p * p);
    std::vector<std::vector<double>> grids(p * p);
    std::size_t usable = 0;

    if (p > 0) {
        models::ForestParams fp;
        fp.n_estimators = opt.n_trees;
        fp.seed = opt.seed;
        models::RandomForestRegressor forest;
        forest.fit(x, y, 1, fp);
        for (const auto& tree : forest.trees()) {
            detail::TreeMarginals m(tree, domain);
            std::vector<std::vector<double>> singles(p);
            for (std::size_t d = 0; d < p; ++d) {
                singles[d] = m.single(d);
                for (std::size_t k = 0; k < axes[d].size(); ++k)
                    curves[d][k].push_back(singles[d][m.locate(d, axes[d][k].first)]);
            }
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = a + 1; b < p; ++b) {
                    const auto joint = m.pair(a, b);
                    auto& g = grids[a * p + b];
                    g.resize(axes[a].size() * axes[b].size(), 0.0);
                    for (std::size_t i = 0; i < axes[a].size(); ++i)
                        for (std::size_t j = 0; j < axes[b].size(); ++j)
                            g[i * axes[b].size() + j] +=
                                joint[m.locate(a, axes[a][i].first) * m.intervals(b) + m.locate(b, axes[b][j].first)];
                    if (m.variance() > 1e-14) {
                        const double va = m.single_variance(a, singles[a]);
                        const double vb = m.single_variance(b, singles[b]);
                        pair_frac[a * p + b].push_back(std::max(0.0, (m.pair_variance(a, b, joint) - va - vb) / m.variance()));
                    }
                }
            if (m.variance() > 1e-14) {
                ++usable;
                for (std::size_t d = 0; d < p; ++d) single_frac[d].push_back(m.single_variance(d, singles[d]) / m.variance());
            }
        }
    }
    table.trees_with_variance = usable;

    const double trees = static_cast<double>(std::max<std::size_t>(1, opt.n_trees));
    for (std::size_t d = 0; d < p; ++d) {
        SingleImportance s;
        s.hyperparameter = hps[d].name;
        s.importance = usable ? mean(single_frac[d]) : 0.0;
        s.sd = usable ? stddev(single_frac[d]) : 0.0;
        for (std::size_t k = 0; k < axes[d].size(); ++k) {
            s.curve.values.push_back(axes[d][k].second);
            s.curve.performance.push_back(mean(curves[d][k]));
            s.curve.sd.push_back(stddev(curves[d][k]));
        }
        table.singles.push_back(std::move(s));
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a + 1; b < p; ++b) {
            PairImportance pi;
            pi.first = hps[a].name;
            pi.second = hps[b].name;
            pi.importance = usable ? mean(pair_frac[a * p + b]) : 0.0;
            for (const auto& v : axes[a]) pi.first_values.push_back(v.second);
            for (const auto& v : axes[b]) pi.second_values.push_back(v.second);
            const auto& g = grids[a * p + b];
            pi.grid.assign(axes[a].size(), std::vector<double>(axes[b].size(), 0.0));
            for (std::size_t i = 0; i < axes[a].size(); ++i)
                for (std::size_t j = 0; j < axes[b].size(); ++j) pi.grid[i][j] = g[i * axes[b].size() + j] / trees;
            table.pairs.push_back(std::move(pi));
        }
    std::stable_sort(table.singles.begin(), table.singles.end(),
                     [](const auto& l, const auto& r) { return l.importance > r.importance; });
    std::stable_sort(table.pairs.begin(), table.pairs.end(),
                     [](const auto& l, const auto& r) { return l.importance > r.importance; });
    return table;
}

inline double importance_of(const ImportanceTable& t, const std::string& hp) {
    for (const auto& s : t.singles)
        if (s.hyperparameter == hp) return s.importance;
    throw Error(ErrorKind::not_found, "unknown hyperparameter '" + hp + "'");
}

inline double importance_of(const ImportanceTable& t, const std::string& a, const std::string& b) {
    for (const auto& s : t.pairs)
        if ((s.first == a && s.second == b) || (s.first == b && s.second == a)) return s.importance;
    throw Error(ErrorKind::not_found, "unknown hyperparameter pair '" + a + "', '" + b + "'");
}

inline json to_json(const ImportanceTable& t) {
    auto values = [](const std::vector<Value>& vs) {
        json a = json::array();
        for (const auto& v : vs) a.push_back(to_json(v));
        return a;
    };
    json singles = json::array();
    for (const auto& s : t.singles)
        singles.push_back({{"hyperparameter", s.hyperparameter},
                           {"importance", s.importance},
                           {"sd", s.sd},
                           {"curve", {{"values", values(s.curve.values)}, {"performance", s.curve.performance}, {"sd", s.curve.sd}}}});
    json pairs = json::array();
    for (const auto& s : t.pairs)
        pairs.push_back({{"hyperparameters", {s.first, s.second}},
                         {"importance", s.importance},
                         {"grid", {{"first_values", values(s.first_values)}, {"second_values", values(s.second_values)}, {"performance", s.grid}}}});
    return {{"singles", singles},
            {"pairs", pairs},
            {"n_candidates", t.n_candidates},
            {"n_trees", t.n_trees},
            {"trees_with_variance", t.trees_with_variance}};
}

/// Flat CSV: one row per single or pair.
inline std::string importance_to_csv(const ImportanceTable& t) {
    std::string out = "hyperparameters,importance\n";
    for (const auto& s : t.singles) out += csv::escape(s.hyperparameter) + "," + format_number(s.importance) + "\n";
    for (const auto& s : t.pairs) out += csv::escape(s.first + "|" + s.second) + "," + format_number(s.importance) + "\n";
    return out;
}

}  // namespace runlens

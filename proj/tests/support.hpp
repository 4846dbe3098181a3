#pragma once
// Fixtures and independent brute-force oracles shared by the test binaries.
// Nothing here calls the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "runlens/runlens.hpp"

namespace testing_support {

using namespace runlens;

inline std::string golden(const std::string& name) { return std::string(RUNLENS_GOLDEN_DIR) + "/" + name; }
inline std::string test_data(const std::string& name) { return std::string(RUNLENS_TEST_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ------------------------------------------------------------------ fixtures

inline Hyperparameter num_hp(const std::string& name, double lo, double hi, double def,
                             HpKind kind = HpKind::continuous, std::optional<Condition> cond = std::nullopt) {
    Hyperparameter hp;
    hp.name = name;
    hp.kind = kind;
    hp.lower = lo;
    hp.upper = hi;
    hp.default_value = def;
    hp.condition = std::move(cond);
    return hp;
}

inline Hyperparameter cat_hp(const std::string& name, std::vector<std::string> choices,
                             std::optional<Condition> cond = std::nullopt) {
    Hyperparameter hp;
    hp.name = name;
    hp.kind = HpKind::categorical;
    hp.default_value = choices.front();
    hp.choices = std::move(choices);
    hp.condition = std::move(cond);
    return hp;
}

/// Linear pipeline n0 -> n1 -> ... over the given primitives; prefixes are optional.
inline PipelineGraph chain(const std::vector<std::string>& prims, const std::vector<std::string>& prefixes = {}) {
    std::vector<PipelineNode> nodes;
    std::vector<PipelineEdge> edges;
    for (std::size_t i = 0; i < prims.size(); ++i) {
        nodes.push_back({"n" + std::to_string(i), prims[i], i < prefixes.size() ? prefixes[i] : ""});
        if (i > 0) edges.push_back({"n" + std::to_string(i - 1), "n" + std::to_string(i), std::nullopt});
    }
    return PipelineGraph(std::move(nodes), std::move(edges));
}

inline Candidate candidate(const std::string& id, double t, PipelineGraph g, Config cfg = {},
                           std::optional<double> perf = 0.5) {
    Candidate c;
    c.id = id;
    c.timestamp = t;
    c.pipeline = std::move(g);
    c.config = std::move(cfg);
    c.validation_performance = perf;
    c.train_performance = perf;
    return c;
}

inline RunHistory make_run(SearchSpace space, std::vector<Candidate> cands, const std::string& id = "test-run") {
    RunHistory run;
    run.run_id = id;
    run.search_spaces = {std::move(space)};
    run.merged_space = merge_search_spaces(run.search_spaces);
    run.candidates = std::move(cands);
    return run;
}

/// Table of numeric columns x1..xp from a row-major matrix.
inline Table numeric_table(const Matrix& x, const std::string& stem = "x") {
    std::vector<Column> cols;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Column c;
        c.name = stem + std::to_string(j + 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) c.values.push_back(x(i, j));
        cols.push_back(std::move(c));
    }
    return Table(std::move(cols));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ------------------------------------------------------------------ oracles

/// Minimum assignment cost over all n! permutations.
inline double brute_force_assignment(const Matrix& cost) {
    const auto n = static_cast<int>(cost.rows());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct OracleFrame {
    std::size_t nodes = 0, edges = 0;
    int max_path_length = 0;
    /// Zero-cost matches selected when this frame's pipeline was folded in.
    std::size_t zero_matches = 0;
    /// Whether every minimum-cost mapping selects the same zero-cost pairs.
    bool unambiguous = true;
};

/// Exhaustive-mapping fold of pipelines: each step tries every padded bijection between the
/// merged graph and the new pipeline, keeps the cheapest, and unites on its zero-cost pairs.
class MergeOracle {
public:
    OracleFrame add(const PipelineGraph& g) {
        std::vector<std::string> ids, prims;
        for (const auto& n : g.nodes()) {
            ids.push_back(n.id);
            prims.push_back(n.primitive);
        }
        auto index = [&](const std::string& id) {
            return static_cast<int>(std::find(ids.begin(), ids.end(), id) - ids.begin());
        };
        std::vector<std::pair<int, int>> pedges;
        std::set<int> fed;
        for (const auto& e : g.edges()) {
            pedges.emplace_back(e.from == source_node_id ? -1 : index(e.from), index(e.to));
            fed.insert(index(e.to));
        }
        for (int v = 0; v < static_cast<int>(ids.size()); ++v)
            if (!fed.count(v)) pedges.emplace_back(-1, v);
        const auto pl = layers(static_cast<int>(ids.size()), pedges);
        const auto gl = layers(static_cast<int>(prims_.size()), {edges_.begin(), edges_.end()});

        const int m = static_cast<int>(prims_.size()), k = static_cast<int>(prims.size());
        const int n = std::max(m, k);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        std::set<std::vector<std::pair<int, int>>> best_zero_sets;
        do {
            double c = 0.0;
            std::vector<std::pair<int, int>> zeros;
            for (int i = 0; i < n; ++i) {
                const int j = perm[static_cast<std::size_t>(i)];
                if (i < m && j < k) {
                    double cc = (prims_[static_cast<std::size_t>(i)] == prims[static_cast<std::size_t>(j)] ? 0.0 : 1.0) +
                                0.5 * std::abs(gl[static_cast<std::size_t>(i)] - pl[static_cast<std::size_t>(j)]);
                    c += cc;
                    if (cc == 0.0) zeros.emplace_back(i, j);
                } else if (i < m || j < k) {
                    c += 1.0;
                }
            }
            if (c < best - 1e-12) {
                best = c;
                best_zero_sets = {zeros};
            } else if (std::abs(c - best) <= 1e-12) {
                best_zero_sets.insert(zeros);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));

        OracleFrame f;
        f.unambiguous = best_zero_sets.size() <= 1;
        std::map<int, int> target;
        if (!best_zero_sets.empty())
            for (auto [i, j] : *best_zero_sets.begin()) target[j] = i;
        f.zero_matches = target.size();
        std::vector<int> mapped(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            if (target.count(j)) {
                mapped[static_cast<std::size_t>(j)] = target[j];
            } else {
                mapped[static_cast<std::size_t>(j)] = static_cast<int>(prims_.size());
                prims_.push_back(prims[static_cast<std::size_t>(j)]);
            }
        }
        for (auto [a, b] : pedges)
            edges_.insert({a < 0 ? -1 : mapped[static_cast<std::size_t>(a)], mapped[static_cast<std::size_t>(b)]});
        const auto fl = layers(static_cast<int>(prims_.size()), {edges_.begin(), edges_.end()});
        f.nodes = prims_.size();
        f.edges = edges_.size();
        f.max_path_length = fl.empty() ? 0 : *std::max_element(fl.begin(), fl.end()) + 1;
        return f;
    }

    std::size_t nodes() const { return prims_.size(); }

private:
    static std::vector<int> layers(int n, const std::vector<std::pair<int, int>>& edges) {
        std::vector<int> l(static_cast<std::size_t>(n), 0);
        for (int pass = 0; pass <= n; ++pass)
            for (auto [a, b] : edges)
                if (a >= 0) l[static_cast<std::size_t>(b)] = std::max(l[static_cast<std::size_t>(b)], l[static_cast<std::size_t>(a)] + 1);
        return l;
    }

    std::vector<std::string> prims_;
    std::set<std::pair<int, int>> edges_;
};

struct GridDecomposition {
    double first = 0.0, second = 0.0, interaction = 0.0;
};

/// Functional ANOVA of f on [0,1]^2 by brute force on a g x g midpoint grid.
template <class F>
GridDecomposition grid_decomposition(F f, int g = 200) {
    std::vector<double> v(static_cast<std::size_t>(g * g));
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) v[static_cast<std::size_t>(i * g + j)] = f((i + 0.5) / g, (j + 0.5) / g);
    const double mu = std::accumulate(v.begin(), v.end(), 0.0) / (g * g);
    double total = 0.0;
    for (double x : v) total += (x - mu) * (x - mu);
    total /= g * g;
    std::vector<double> ma(static_cast<std::size_t>(g), 0.0), mb(static_cast<std::size_t>(g), 0.0);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            ma[static_cast<std::size_t>(i)] += v[static_cast<std::size_t>(i * g + j)] / g;
            mb[static_cast<std::size_t>(j)] += v[static_cast<std::size_t>(i * g + j)] / g;
        }
    double va = 0.0, vb = 0.0;
    for (int i = 0; i < g; ++i) {
        va += (ma[static_cast<std::size_t>(i)] - mu) * (ma[static_cast<std::size_t>(i)] - mu) / g;
        vb += (mb[static_cast<std::size_t>(i)] - mu) * (mb[static_cast<std::size_t>(i)] - mu) / g;
    }
    if (total <= 0.0) return {};
    return {va / total, vb / total, std::max(0.0, (total - va - vb) / total)};
}

/// Synthetic history for importance checks: perf = f(a, b) on two numeric hyperparameters in [0,1].
template <class F>
RunHistory importance_history(F f, std::size_t n, std::uint64_t seed) {
    SearchSpace space({num_hp("a", 0, 1, 0.5), num_hp("b", 0, 1, 0.5)});
    std::vector<Candidate> cands;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = u(rng), b = u(rng);
        cands.push_back(candidate("c" + std::to_string(i), static_cast<double>(i), chain({"decision-tree"}),
                                  {{"a", a}, {"b", b}}, f(a, b)));
    }
    return make_run(space, std::move(cands));
}

}  // namespace testing_support

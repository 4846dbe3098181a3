#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "run_history.hpp"

namespace runlens {

/// Above this many hyperparameters the 2^n boundary corners are not generated.
inline constexpr std::size_t boundary_hyperparameter_limit = 10;

struct BoundaryCandidates {
    std::vector<Config> configs;
    bool skipped = false;
};

/// Corners of the merged space: {lower, upper} per numeric and {first, last} choice per categorical.
inline BoundaryCandidates boundary_candidates(const SearchSpace& merged) {
    BoundaryCandidates out;
    if (merged.size() > boundary_hyperparameter_limit) {
        out.skipped = true;
        return out;
    }
    out.configs.emplace_back();
    for (const auto& hp : merged.hyperparameters()) {
        std::vector<Value> extremes;
        if (hp.numeric()) {
            extremes = {hp.lower, hp.upper};
        } else {
            extremes.push_back(hp.choices.front());
            if (hp.choices.size() > 1) extremes.push_back(hp.choices.back());
        }
        std::vector<Config> next;
        next.reserve(out.configs.size() * extremes.size());
        for (const auto& partial : out.configs)
            for (const auto& v : extremes) {
                auto c = partial;
                c[hp.name] = v;
                next.push_back(std::move(c));
            }
        out.configs = std::move(next);
    }
    if (merged.empty()) out.configs.clear();
    return out;
}

/// Depth-weighted heterogeneous distance between two complete configurations: a sum over
/// hyperparameters of |normalized difference| / depth (numeric) or mismatch / depth (categorical).
/// A numeric hyperparameter with max == min contributes 0.
inline double distance(const Config& a, const Config& b, const SearchSpace& merged) {
    double d = 0.0;
    for (const auto& hp : merged.hyperparameters()) {
        auto ia = a.find(hp.name);
        auto ib = b.find(hp.name);
        if (ia == a.end() || ib == b.end())
            throw Error(ErrorKind::contract, "distance: configuration is not complete (missing '" + hp.name + "')");
        const double depth = static_cast<double>(merged.depth(hp.name));
        if (hp.numeric()) {
            const double range = hp.upper - hp.lower;
            if (range == 0.0) continue;
            const double x = (as_number(ia->second) - hp.lower) / (range * depth);
            const double y = (as_number(ib->second) - hp.lower) / (range * depth);
            d += std::abs(x - y);
        } else {
            d += (ia->second == ib->second ? 0.0 : 1.0) / depth;
        }
    }
    return d;
}

inline Matrix distance_matrix(const std::vector<Config>& configs, const SearchSpace& merged) {
    const auto n = static_cast<Eigen::Index>(configs.size());
    Matrix dm = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double d = distance(configs[static_cast<std::size_t>(i)], configs[static_cast<std::size_t>(j)], merged);
            dm(i, j) = d;
            dm(j, i) = d;
        }
    return dm;
}

struct Point2 {
    double x = 0.0, y = 0.0;
};

/// Classical MDS: double-center the squared distances and keep the top two eigenpairs.
/// Each axis is flipped so that its largest-magnitude coordinate is positive.
inline std::vector<Point2> embed(const Matrix& dm) {
    const auto n = dm.rows();
    if (dm.rows() != dm.cols()) throw Error(ErrorKind::contract, "embed: distance matrix must be square");
    std::vector<Point2> out(static_cast<std::size_t>(n));
    if (n == 0) return out;
    Matrix sq = dm.array().square().matrix();
    Matrix centering = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    Matrix b = -0.5 * centering * sq * centering;
    b = 0.5 * (b + b.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(b);
    const auto& values = solver.eigenvalues();    // ascending
    const auto& vectors = solver.eigenvectors();
    for (int axis = 0; axis < 2; ++axis) {
        const Eigen::Index k = n - 1 - axis;
        if (k < 0) break;
        const double lambda = values(k);
        if (!(lambda > 1e-12 * std::max(1.0, std::abs(values(n - 1))))) continue;
        Vector coord = vectors.col(k) * std::sqrt(lambda);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (std::abs(coord(i)) > std::abs(coord(arg)) + 1e-12) arg = i;
        if (coord(arg) < 0) coord = -coord;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& p = out[static_cast<std::size_t>(i)];
            (axis == 0 ? p.x : p.y) = coord(i);
        }
    }
    return out;
}

/// k-nearest-neighbour surface with inverse-distance weights; exact at support points and
/// bounded by the observed performances.
class PerformanceSurface {
public:
    PerformanceSurface(std::vector<Point2> points, std::vector<double> values, std::size_t k = 5)
        : points_(std::move(points)), values_(std::move(values)) {
        if (points_.empty() || points_.size() != values_.size())
            throw Error(ErrorKind::insufficient_data, "surface needs at least one scored point");
        k_ = std::min(k, points_.size());
    }

    double operator()(Point2 q) const {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(points_.size());
        for (std::size_t i = 0; i < points_.size(); ++i)
            dist.push_back({std::hypot(points_[i].x - q.x, points_[i].y - q.y), i});
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k_), dist.end());
        if (dist.front().first == 0.0) {
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < k_ && dist[i].first == 0.0; ++i, ++n) s += values_[dist[i].second];
            return s / static_cast<double>(n);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < k_; ++i) {
            const double w = 1.0 / dist[i].first;
            num += w * values_[dist[i].second];
            den += w;
        }
        return num / den;
    }

    std::size_t k() const { return k_; }

private:
    std::vector<Point2> points_;
    std::vector<double> values_;
    std::size_t k_ = 1;
};

inline PerformanceSurface fit_surface(std::vector<Point2> coords, std::vector<double> performances) {
    return PerformanceSurface(std::move(coords), std::move(performances));
}

inline constexpr std::size_t heatmap_resolution = 50;

struct Heatmap {
    std::size_t resolution = heatmap_resolution;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    std::vector<double> cells;  // row-major, row = y index

    double at(std::size_t row, std::size_t col) const { return cells[row * resolution + col]; }
    Point2 cell_center(std::size_t row, std::size_t col) const {
        const double w = (x_max - x_min) / static_cast<double>(resolution);
        const double h = (y_max - y_min) / static_cast<double>(resolution);
        return {x_min + (static_cast<double>(col) + 0.5) * w, y_min + (static_cast<double>(row) + 0.5) * h};
    }
};

/// Bounding box of `coords` padded 5% per side; a degenerate extent is padded by 1.
inline std::array<double, 4> padded_bounds(const std::vector<Point2>& coords) {
    double x0 = coords.front().x, x1 = x0, y0 = coords.front().y, y1 = y0;
    for (const auto& p : coords) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    auto pad = [](double& lo, double& hi) {
        const double ext = hi - lo;
        const double p = ext > 0.0 ? 0.05 * ext : 1.0;
        lo -= p;
        hi += p;
    };
    pad(x0, x1);
    pad(y0, y1);
    return {x0, x1, y0, y1};
}

inline Heatmap heatmap(const PerformanceSurface& surface, const std::vector<Point2>& coords,
                       std::size_t resolution = heatmap_resolution) {
    if (coords.empty()) throw Error(ErrorKind::insufficient_data, "heatmap needs at least one coordinate");
    Heatmap hm;
    hm.resolution = resolution;
    auto [x0, x1, y0, y1] = padded_bounds(coords);
    hm.x_min = x0;
    hm.x_max = x1;
    hm.y_min = y0;
    hm.y_max = y1;
    hm.cells.resize(resolution * resolution);
    for (std::size_t r = 0; r < resolution; ++r)
        for (std::size_t c = 0; c < resolution; ++c) hm.cells[r * resolution + c] = surface(hm.cell_center(r, c));
    return hm;
}

struct EmbeddedPoint {
    std::string id;  // candidate id, or "boundary-<k>"
    bool boundary = false;
    Point2 position;
    std::optional<double> performance;
    double timestamp = 0.0;
};

struct CoverageEmbedding {
    std::vector<EmbeddedPoint> points;  // displayed points for this frame
    std::optional<Heatmap> heatmap;
    bool boundary_skipped = false;
    double at = 0.0;
};

/// Embeds every scored candidate plus the boundary corners once, so positions stay fixed
/// across frames; each frame shows candidates with timestamp <= t and fits its own surface.
class CoverageModel {
public:
    explicit CoverageModel(const RunHistory& history) {
        const auto& space = history.merged_space;
        std::vector<Config> configs;
        for (const auto* c : history.ordered_candidates()) {
            if (!c->scored()) continue;
            configs.push_back(pad_with_defaults(c->config, space));
            all_.push_back({c->id, false, {}, c->validation_performance, c->timestamp});
        }
        auto boundary = boundary_candidates(space);
        boundary_skipped_ = boundary.skipped;
        for (std::size_t k = 0; k < boundary.configs.size(); ++k) {
            configs.push_back(boundary.configs[k]);
            all_.push_back({"boundary-" + std::to_string(k), true, {}, std::nullopt, 0.0});
        }
        distances_ = distance_matrix(configs, space);
        auto coords = embed(distances_);
        for (std::size_t i = 0; i < coords.size(); ++i) all_[i].position = coords[i];
    }

    const std::vector<EmbeddedPoint>& all_points() const { return all_; }
    const Matrix& distances() const { return distances_; }
    bool boundary_skipped() const { return boundary_skipped_; }

    CoverageEmbedding frame(double t) const {
        CoverageEmbedding out;
        out.at = t;
        out.boundary_skipped = boundary_skipped_;
        std::vector<Point2> scored_pos, every_pos;
        std::vector<double> scored_val;
        for (const auto& p : all_) {
            every_pos.push_back(p.position);
            if (!p.boundary && p.timestamp > t) continue;
            out.points.push_back(p);
            if (!p.boundary) {
                scored_pos.push_back(p.position);
                scored_val.push_back(*p.performance);
            }
        }
        if (!scored_pos.empty()) out.heatmap = heatmap(fit_surface(scored_pos, scored_val), every_pos);
        return out;
    }

private:
    std::vector<EmbeddedPoint> all_;
    Matrix distances_;
    bool boundary_skipped_ = false;
};

inline CoverageEmbedding coverage_timelapse(const RunHistory& history, double t) {
    return CoverageModel(history).frame(t);
}

inline json to_json(const CoverageEmbedding& e) {
    json pts = json::array();
    for (const auto& p : e.points)
        pts.push_back({{"id", p.id},
                       {"boundary", p.boundary},
                       {"x", p.position.x},
                       {"y", p.position.y},
                       {"performance", p.performance ? json(*p.performance) : json(nullptr)},
                       {"timestamp", p.boundary ? json(nullptr) : json(p.timestamp)}});
    json j{{"points", pts}, {"boundary_skipped", e.boundary_skipped}};
    if (e.heatmap) {
        const auto& h = *e.heatmap;
        j["heatmap"] = {{"resolution", h.resolution},
                        {"bounds", {{"x_min", h.x_min}, {"x_max", h.x_max}, {"y_min", h.y_min}, {"y_max", h.y_max}}},
                        {"cells", h.cells}};
    } else {
        j["heatmap"] = nullptr;
    }
    return j;
}

inline std::string embedding_to_csv(const CoverageEmbedding& e) {
    std::string out = "id,boundary,x,y,performance,timestamp\n";
    for (const auto& p : e.points) {
        out += p.id + "," + (p.boundary ? "true" : "false") + "," + format_number(p.position.x) + "," +
               format_number(p.position.y) + "," + (p.performance ? format_number(*p.performance) : "") + "," +
               (p.boundary ? "" : format_number(p.timestamp)) + "\n";
    }
    return out;
}

}  // namespace runlens

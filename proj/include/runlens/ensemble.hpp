#pragma once

#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "coverage.hpp"
#include "models/oracle.hpp"

namespace runlens {

struct WeightedOracle {
    std::string name;
    const PredictionOracle* oracle = nullptr;
    double weight = 0.0;
};

struct EnsemblePrediction {
    Matrix proba;
    std::vector<int> labels;
    /// Per member: its probabilities, or empty when it failed.
    std::vector<Matrix> member_proba;
    std::vector<bool> failed;
    std::vector<double> effective_weights;
    std::vector<std::string> warnings;
};

/// Weighted soft vote. Members that throw are flagged and the remaining weights renormalized.
inline EnsemblePrediction ensemble_predict(const std::vector<WeightedOracle>& members, const Table& x) {
    if (members.empty()) throw Error(ErrorKind::contract, "ensemble has no members");
    double total = 0.0;
    for (const auto& m : members) {
        if (m.weight < 0) throw Error(ErrorKind::contract, "negative ensemble weight");
        total += m.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::contract, "ensemble weights must sum to 1");
    EnsemblePrediction out;
    out.member_proba.resize(members.size());
    out.failed.assign(members.size(), false);
    out.effective_weights.assign(members.size(), 0.0);
    double alive = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        try {
            out.member_proba[i] = members[i].oracle->predict_proba(x);
            alive += members[i].weight;
        } catch (const std::exception& e) {
            out.failed[i] = true;
            out.warnings.push_back("member '" + members[i].name + "' failed: " + e.what());
        }
    }
    if (alive <= 0.0) throw Error(ErrorKind::unevaluable, "no ensemble member could be evaluated");
    std::size_t classes = members.front().oracle->n_classes();
    out.proba = Matrix::Zero(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(classes));
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (out.failed[i]) continue;
        out.effective_weights[i] = members[i].weight / alive;
        out.proba += out.effective_weights[i] * out.member_proba[i];
    }
    if (alive < total) out.warnings.push_back("weights renormalized over the remaining members");
    out.labels = predict_labels(out.proba);
    return out;
}

/// Numeric encoding of a table for projection: numeric columns as-is (missing filled with the
/// column mean), categorical columns one-hot.
class TableEncoder {
public:
    explicit TableEncoder(const Table& reference) : template_(reference.select_rows({})) {
        for (const auto& c : reference.columns()) {
            if (c.categorical()) {
                fill_.push_back(0.0);
                width_ += c.vocabulary.size();
                continue;
            }
            std::vector<double> present;
            for (double v : c.values)
                if (!is_missing(v)) present.push_back(v);
            fill_.push_back(mean(present));
            width_ += 1;
        }
    }

    std::size_t width() const { return width_; }

    Matrix encode(const Table& t) const {
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(width_));
        Eigen::Index off = 0;
        for (std::size_t j = 0; j < t.cols(); ++j) {
            const auto& c = t.column(j);
            for (std::size_t r = 0; r < t.rows(); ++r) {
                const double v = c.values[r];
                if (c.categorical()) {
                    if (!is_missing(v)) m(static_cast<Eigen::Index>(r), off + static_cast<Eigen::Index>(v)) = 1.0;
                } else {
                    m(static_cast<Eigen::Index>(r), off) = is_missing(v) ? fill_[j] : v;
                }
            }
            off += c.categorical() ? static_cast<Eigen::Index>(c.vocabulary.size()) : 1;
        }
        return m;
    }

    /// Inverse of `encode`; a categorical block decodes to its largest indicator.
    Table decode(const Matrix& m) const {
        std::vector<Column> cols;
        Eigen::Index off = 0;
        for (const auto& tc : template_.columns()) {
            Column c{tc.name, tc.kind, std::vector<double>(static_cast<std::size_t>(m.rows())), tc.vocabulary};
            const auto w = tc.categorical() ? static_cast<Eigen::Index>(tc.vocabulary.size()) : 1;
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                c.values[static_cast<std::size_t>(r)] =
                    tc.categorical() ? static_cast<double>(argmax(m.row(r).segment(off, w).transpose())) : m(r, off);
            off += w;
            cols.push_back(std::move(c));
        }
        return Table(std::move(cols));
    }

private:
    Table template_;
    std::vector<double> fill_;
    std::size_t width_ = 0;
};

inline constexpr std::size_t surface_resolution = 64;

/// Shared 2-D PCA basis of the encoded data.
struct SurfaceBasis {
    Vector mean;
    Matrix components;  // width x 2
    std::array<double, 4> bounds{};  // x_min, x_max, y_min, y_max
    std::size_t resolution = surface_resolution;

    Point2 project(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        const Eigen::RowVectorXd p = (row - mean.transpose()) * components;
        return {p(0), p(1)};
    }

    Point2 cell_center(std::size_t row, std::size_t col) const {
        const double w = (bounds[1] - bounds[0]) / static_cast<double>(resolution);
        const double h = (bounds[3] - bounds[2]) / static_cast<double>(resolution);
        return {bounds[0] + (static_cast<double>(col) + 0.5) * w, bounds[2] + (static_cast<double>(row) + 0.5) * h};
    }
};

struct DecisionSurface {
    std::string name;
    std::vector<int> cells;  // row-major, row = y index
};

struct SurfaceSet {
    SurfaceBasis basis;
    std::vector<DecisionSurface> members;
    DecisionSurface ensemble;
    std::vector<Point2> points;
    std::vector<std::string> warnings;
};

/// PCA fitted once on the encoded data; each grid-cell center is mapped back to the input space
/// and classified by every member and by the soft-vote ensemble.
inline SurfaceSet decision_surfaces(const std::vector<WeightedOracle>& members, const Table& x,
                                    std::size_t resolution = surface_resolution) {
    TableEncoder enc(x);
    if (enc.width() < 2) throw Error(ErrorKind::degenerate, "decision surface needs at least 2 encoded dimensions");
    if (x.rows() == 0) throw Error(ErrorKind::insufficient_data, "decision surface needs data rows");
    const Matrix e = enc.encode(x);
    SurfaceSet s;
    s.basis.resolution = resolution;
    s.basis.mean = e.colwise().mean().transpose();
    const Matrix centered = e.rowwise() - s.basis.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, e.rows() - 1));
    if (cov.trace() <= 1e-12) throw Error(ErrorKind::degenerate, "data has zero variance; no decision surface");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    const auto q = cov.rows();
    s.basis.components = Matrix(q, 2);
    for (int c = 0; c < 2; ++c) {
        Vector v = solver.eigenvectors().col(q - 1 - c);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < v.size(); ++i)
            if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
        if (v(arg) < 0) v = -v;
        s.basis.components.col(c) = v;
    }
    for (Eigen::Index r = 0; r < e.rows(); ++r) s.points.push_back(s.basis.project(e.row(r)));
    s.basis.bounds = padded_bounds(s.points);

    Matrix grid(static_cast<Eigen::Index>(resolution * resolution), 2);
    for (std::size_t r = 0; r < resolution; ++r)
        for (std::size_t c = 0; c < resolution; ++c) {
            const auto p = s.basis.cell_center(r, c);
            grid(static_cast<Eigen::Index>(r * resolution + c), 0) = p.x;
            grid(static_cast<Eigen::Index>(r * resolution + c), 1) = p.y;
        }
    const Matrix back = (grid * s.basis.components.transpose()).rowwise() + s.basis.mean.transpose();
    const Table cells = enc.decode(back);
    const auto pred = ensemble_predict(members, cells);
    s.warnings = pred.warnings;
    for (std::size_t i = 0; i < members.size(); ++i) {
        DecisionSurface d{members[i].name, {}};
        if (!pred.failed[i]) d.cells = predict_labels(pred.member_proba[i]);
        s.members.push_back(std::move(d));
    }
    s.ensemble = {"ensemble", pred.labels};
    return s;
}

inline json to_json(const SurfaceSet& s) {
    auto grid = [&](const std::vector<int>& cells) {
        json rows = json::array();
        if (cells.empty()) return json(nullptr);
        for (std::size_t r = 0; r < s.basis.resolution; ++r)
            rows.push_back(std::vector<int>(cells.begin() + static_cast<long>(r * s.basis.resolution),
                                            cells.begin() + static_cast<long>((r + 1) * s.basis.resolution)));
        return rows;
    };
    json members = json::array();
    for (const auto& m : s.members) members.push_back({{"name", m.name}, {"cells", grid(m.cells)}});
    json comps = json::array();
    for (Eigen::Index c = 0; c < s.basis.components.cols(); ++c) {
        std::vector<double> v(static_cast<std::size_t>(s.basis.components.rows()));
        for (Eigen::Index i = 0; i < s.basis.components.rows(); ++i) v[static_cast<std::size_t>(i)] = s.basis.components(i, c);
        comps.push_back(v);
    }
    json points = json::array();
    for (const auto& p : s.points) points.push_back({p.x, p.y});
    return {{"resolution", s.basis.resolution},
            {"bounds", {{"x_min", s.basis.bounds[0]}, {"x_max", s.basis.bounds[1]}, {"y_min", s.basis.bounds[2]}, {"y_max", s.basis.bounds[3]}}},
            {"basis", {{"mean", std::vector<double>(s.basis.mean.data(), s.basis.mean.data() + s.basis.mean.size())}, {"components", comps}}},
            {"members", members},
            {"ensemble", {{"name", "ensemble"}, {"cells", grid(s.ensemble.cells)}}},
            {"points", points},
            {"warnings", s.warnings}};
}

}  // namespace runlens

#pragma once

#include <limits>
#include <vector>

#include "common.hpp"

namespace runlens {

struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Minimum-cost perfect assignment on a square, finite, non-negative matrix
/// (Kuhn-Munkres with row/column potentials, O(n^3)).
inline Assignment hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols())
        throw Error(ErrorKind::contract, "hungarian: cost matrix must be square, got " +
                                             std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()));
    const auto n = static_cast<std::size_t>(cost.rows());
    for (Eigen::Index i = 0; i < cost.rows(); ++i)
        for (Eigen::Index j = 0; j < cost.cols(); ++j)
            if (!std::isfinite(cost(i, j)) || cost(i, j) < 0.0)
                throw Error(ErrorKind::contract, "hungarian: entries must be finite and non-negative");
    Assignment out;
    if (n == 0) return out;

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based: column 0 is a virtual column holding the row being inserted
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    out.row_to_col.assign(n, -1);
    for (std::size_t j = 1; j <= n; ++j) out.row_to_col[match[j] - 1] = static_cast<int>(j - 1);
    for (std::size_t i = 0; i < n; ++i)
        out.cost += cost(static_cast<Eigen::Index>(i), out.row_to_col[i]);
    return out;
}

}  // namespace runlens

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "covmatch/graph.hpp"

namespace covmatch {

enum class Sense { Min, Max };

struct CostMatrix {
    Eigen::MatrixXd c;
    Sense sense = Sense::Min;

    int m() const { return static_cast<int>(c.rows()); }

    void validate() const {
        if (c.rows() != c.cols()) throw std::invalid_argument("cost matrix must be square");
        if (c.rows() < 1) throw std::invalid_argument("cost matrix must be at least 1 x 1");
        if (!c.allFinite()) throw std::invalid_argument("cost matrix has a non-finite entry");
    }
};

struct LapResult {
    Permutation assignment;  // assignment[i] = column matched to row i
    double objective;        // sum of original costs along the assignment
};

namespace detail {

// Potentials-based Hungarian algorithm, O(m^3). Rows are inserted one at
// a time; each insertion grows an alternating tree until a free column is
// found. Indices are shifted by one so 0 can serve as the virtual root.
inline std::vector<int> hungarian_min(const Eigen::MatrixXd& c) {
    const int m = static_cast<int>(c.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(m) + 1, 0);  // column -> row
    std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
    std::vector<double> minv(static_cast<std::size_t>(m) + 1);
    std::vector<char> used(static_cast<std::size_t>(m) + 1);
    for (int i = 1; i <= m; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        // Walk the alternating tree back to the root, flipping matches.
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j)
        row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
    return row_to_col;
}

inline double assignment_cost(const Eigen::MatrixXd& c, const std::vector<int>& row_to_col) {
    double total = 0.0;
    for (std::size_t i = 0; i < row_to_col.size(); ++i)
        total += c(static_cast<Eigen::Index>(i), row_to_col[i]);
    return total;
}

}  // namespace detail

// Globally optimal assignment. Max is solved as Min on the negated
// matrix; the reported objective is re-summed from the original costs in
// row order so the Min/Max duality holds to the last bit.
inline LapResult solve_lap(const CostMatrix& cost) {
    cost.validate();
    std::vector<int> row_to_col;
    if (cost.sense == Sense::Min) {
        row_to_col = detail::hungarian_min(cost.c);
    } else {
        const Eigen::MatrixXd neg = -cost.c;
        row_to_col = detail::hungarian_min(neg);
    }
    const double obj = detail::assignment_cost(cost.c, row_to_col);
    return {Permutation(std::move(row_to_col)), obj};
}

// Exhaustive reference for m <= 9. Ties go to the lexicographically
// smallest assignment vector, which std::next_permutation enumeration
// order gives for free.
inline LapResult brute_force_lap(const CostMatrix& cost) {
    cost.validate();
    const int m = cost.m();
    if (m > 9) throw std::invalid_argument("brute-force assignment is capped at m = 9");
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_obj = detail::assignment_cost(cost.c, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
        const double obj = detail::assignment_cost(cost.c, perm);
        const bool better = cost.sense == Sense::Min ? obj < best_obj : obj > best_obj;
        if (better) {
            best = perm;
            best_obj = obj;
        }
    }
    return {Permutation(std::move(best)), best_obj};
}

}  // namespace covmatch

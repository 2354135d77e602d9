#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "covmatch/graph.hpp"

namespace covmatch {

// How a pair of node attribute values turns into one regressor.
enum class TransformKind {
    AbsDiff,            // |z_i - z_j|
    EqualityIndicator,  // 1 if z_i == z_j else 0
};

inline double transform_node_pair(TransformKind kind, double zi, double zj) {
    switch (kind) {
        case TransformKind::AbsDiff: return std::abs(zi - zj);
        case TransformKind::EqualityIndicator: return zi == zj ? 1.0 : 0.0;
    }
    throw std::logic_error("unknown transform kind");
}

inline const char* transform_name(TransformKind kind) {
    switch (kind) {
        case TransformKind::AbsDiff: return "abs-diff";
        case TransformKind::EqualityIndicator: return "equal";
    }
    throw std::logic_error("unknown transform kind");
}

// Edge covariates (symmetric n x n, zero diagonal) plus node attributes
// (n x d2) with one pairwise transform per attribute column. Missing
// values are rejected at construction; every downstream design row must
// be fully observed.
class CovariateBundle {
public:
    CovariateBundle() = default;

    CovariateBundle(std::vector<Eigen::MatrixXd> edge_covs, Eigen::MatrixXd node_covs,
                    std::vector<TransformKind> node_transforms)
        : edge_covs_(std::move(edge_covs)),
          node_covs_(std::move(node_covs)),
          node_transforms_(std::move(node_transforms)) {
        validate();
    }

    int d1() const { return static_cast<int>(edge_covs_.size()); }
    int d2() const { return static_cast<int>(node_covs_.cols()); }
    // Design dimension: intercept, adjacency, then the covariate columns.
    int dim() const { return d1() + d2() + 2; }

    const std::vector<Eigen::MatrixXd>& edge_covs() const { return edge_covs_; }
    const Eigen::MatrixXd& node_covs() const { return node_covs_; }
    const std::vector<TransformKind>& node_transforms() const { return node_transforms_; }

    // Graphs of order n can be paired with this bundle.
    void check_compatible(int n) const {
        for (const auto& m : edge_covs_) {
            if (m.rows() != n)
                throw std::invalid_argument("edge covariate order " + std::to_string(m.rows()) +
                                            " does not match graph order " + std::to_string(n));
        }
        if (node_covs_.cols() > 0 && node_covs_.rows() != n)
            throw std::invalid_argument("node covariate table has " +
                                        std::to_string(node_covs_.rows()) +
                                        " rows for graph order " + std::to_string(n));
    }

private:
    void validate() const {
        Eigen::Index n = -1;
        for (std::size_t k = 0; k < edge_covs_.size(); ++k) {
            const auto& m = edge_covs_[k];
            if (m.rows() != m.cols())
                throw std::invalid_argument("edge covariate " + std::to_string(k) +
                                            " is not square");
            if (n >= 0 && m.rows() != n)
                throw std::invalid_argument("edge covariates differ in order");
            n = m.rows();
            if (!m.allFinite())
                throw std::invalid_argument("edge covariate " + std::to_string(k) +
                                            " has a missing or non-finite value");
            for (Eigen::Index i = 0; i < n; ++i) {
                if (m(i, i) != 0.0)
                    throw std::invalid_argument("edge covariate " + std::to_string(k) +
                                                " has a nonzero diagonal");
                for (Eigen::Index j = i + 1; j < n; ++j)
                    if (m(i, j) != m(j, i))
                        throw std::invalid_argument("edge covariate " + std::to_string(k) +
                                                    " is not symmetric");
            }
        }
        if (node_covs_.cols() > 0 && !node_covs_.allFinite())
            throw std::invalid_argument("node covariate table has a missing or non-finite value");
        if (static_cast<int>(node_transforms_.size()) != node_covs_.cols())
            throw std::invalid_argument("need exactly one transform per node covariate column");
        if (node_covs_.rows() > 0 && n >= 0 && node_covs_.rows() != n)
            throw std::invalid_argument("node covariate table and edge covariates differ in order");
    }

    std::vector<Eigen::MatrixXd> edge_covs_;
    Eigen::MatrixXd node_covs_{0, 0};
    std::vector<TransformKind> node_transforms_;
};

// Regressor vector for the unordered pair {i, j}:
// (1, A_ij, edge covariates at (i,j), transformed node pairs).
inline Eigen::VectorXd build_design_row(const Graph& a, const CovariateBundle& c, int i, int j) {
    const int n = a.n();
    if (i < 0 || i >= n || j < 0 || j >= n)
        throw std::invalid_argument("design row index out of range");
    if (i == j)
        throw std::invalid_argument("design rows are defined for distinct vertices only");
    c.check_compatible(n);
    Eigen::VectorXd x(c.dim());
    x(0) = 1.0;
    x(1) = a.at(i, j);
    int k = 2;
    for (const auto& m : c.edge_covs()) x(k++) = m(i, j);
    for (int t = 0; t < c.d2(); ++t)
        x(k++) = transform_node_pair(c.node_transforms()[static_cast<std::size_t>(t)],
                                     c.node_covs()(i, t), c.node_covs()(j, t));
    return x;
}

// Unordered seed pairs as (i, j) with i > j, enumerated in a fixed order:
// {0,1,2} gives (1,0), (2,0), (2,1).
inline std::vector<std::pair<int, int>> seed_pairs(const SeedSet& seeds) {
    const auto& ids = seeds.ids();
    std::vector<std::pair<int, int>> out;
    out.reserve(ids.size() * (ids.size() ? ids.size() - 1 : 0) / 2);
    for (std::size_t a = 1; a < ids.size(); ++a)
        for (std::size_t b = 0; b < a; ++b) out.emplace_back(ids[a], ids[b]);
    return out;
}

// Largest Euclidean norm over all pairwise design rows; a scale alarm
// for raw covariates (ages, weights) that would swamp the 0/1 columns.
inline double max_design_norm(const Graph& a, const CovariateBundle& c) {
    double best = 0.0;
    for (int i = 1; i < a.n(); ++i)
        for (int j = 0; j < i; ++j) best = std::max(best, build_design_row(a, c, i, j).norm());
    return best;
}

}  // namespace covmatch

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "covmatch/assign.hpp"
#include "covmatch/glm.hpp"
#include "covmatch/graph.hpp"

namespace covmatch {

inline bool is_doubly_stochastic(const Eigen::MatrixXd& d, double entry_tol = 1e-12,
                                 double sum_tol = 1e-9) {
    if (d.rows() != d.cols() || d.rows() < 1 || !d.allFinite()) return false;
    if ((d.array() < -entry_tol).any()) return false;
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
        if (std::abs(d.row(k).sum() - 1.0) > sum_tol) return false;
        if (std::abs(d.col(k).sum() - 1.0) > sum_tol) return false;
    }
    return true;
}

struct FaqOptions {
    enum class Init { Barycenter, GivenDS };

    int max_iter = 30;
    double rel_tol = 1e-6;
    Init init = Init::Barycenter;
    std::optional<Eigen::MatrixXd> initial_ds;  // required for GivenDS, order n - s
    // Carried into output documents for provenance; the default barycenter
    // path is deterministic and never draws from it. Reserved for
    // randomized restarts.
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (max_iter < 1) throw std::invalid_argument("faq max_iter must be at least 1");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("faq rel_tol must be positive");
        if (init == Init::GivenDS && !initial_ds)
            throw std::invalid_argument("GivenDS init requires an initial matrix");
        if (init == Init::Barycenter && initial_ds)
            throw std::invalid_argument("Barycenter init does not take an initial matrix");
    }
};

struct FaqIterStats {
    double similarity;  // relaxed objective being ascended
    double gamma;       // accepted step length
};

struct FaqResult {
    Permutation permutation;
    double objective;  // squared Frobenius distance at `permutation`
    int iters = 0;
    // True when the projection of the starting point beat the projection
    // of the final iterate; the better of the two is always returned.
    bool used_initial_projection = false;
    std::vector<FaqIterStats> trace;

    FaqResult() : permutation(Permutation::identity(1)), objective(0.0) {}
};

namespace detail {

inline void check_qap_inputs(const Eigen::MatrixXd& p_hat, const Graph& b_tilde) {
    if (p_hat.rows() != p_hat.cols())
        throw std::invalid_argument("similarity matrix must be square");
    if (p_hat.rows() != b_tilde.n())
        throw std::invalid_argument("similarity matrix order does not match graph order");
    if (!p_hat.allFinite())
        throw std::invalid_argument("similarity matrix has a non-finite entry");
}

}  // namespace detail

// || P - Q B Q^T ||_F^2 where Q is the permutation matrix sending
// position i to vertex q[i]; equivalently the sum over all ordered pairs
// of (p(q[i], q[j]) - b(i, j))^2.
inline double qap_objective(const Eigen::MatrixXd& p_hat, const Graph& b_tilde,
                            const Permutation& q) {
    detail::check_qap_inputs(p_hat, b_tilde);
    if (q.n() != b_tilde.n())
        throw std::invalid_argument("permutation order does not match graph order");
    const int n = b_tilde.n();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double diff = p_hat(q[i], q[j]) - b_tilde.at(i, j);
            total += diff * diff;
        }
    }
    return total;
}

inline double qap_objective(const ProbMatrix& p_hat, const Graph& b_tilde, const Permutation& q) {
    return qap_objective(p_hat.values(), b_tilde, q);
}

inline double qap_objective(const Graph& p_hat, const Graph& b_tilde, const Permutation& q) {
    return qap_objective(p_hat.adj(), b_tilde, q);
}

namespace detail {

struct SeedSplit {
    std::vector<int> seeds;
    std::vector<int> nonseeds;
    Eigen::MatrixXd p22, b22;  // nonseed x nonseed blocks
    Eigen::MatrixXd k;         // P21 * B21^T cross anchor, nonseed x nonseed
};

inline SeedSplit split_blocks(const Eigen::MatrixXd& p_hat, const Graph& b_tilde,
                              const SeedSet& seeds) {
    const int n = b_tilde.n();
    seeds.check_within(n);
    if (seeds.size() >= n)
        throw std::invalid_argument("no non-seed vertices left to match");
    SeedSplit sp;
    sp.seeds = seeds.ids();
    sp.nonseeds = seeds.complement(n);
    const int m = static_cast<int>(sp.nonseeds.size());
    const int s = static_cast<int>(sp.seeds.size());
    sp.p22.resize(m, m);
    sp.b22.resize(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) {
            sp.p22(r, c) = p_hat(sp.nonseeds[static_cast<std::size_t>(r)],
                                 sp.nonseeds[static_cast<std::size_t>(c)]);
            sp.b22(r, c) = b_tilde.at(sp.nonseeds[static_cast<std::size_t>(r)],
                                      sp.nonseeds[static_cast<std::size_t>(c)]);
        }
    Eigen::MatrixXd p21(m, s), b21(m, s);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < s; ++c) {
            p21(r, c) = p_hat(sp.nonseeds[static_cast<std::size_t>(r)],
                              sp.seeds[static_cast<std::size_t>(c)]);
            b21(r, c) = b_tilde.at(sp.nonseeds[static_cast<std::size_t>(r)],
                                   sp.seeds[static_cast<std::size_t>(c)]);
        }
    sp.k = p21 * b21.transpose();
    return sp;
}

// Relaxed similarity tr(P22 D B22 D^T) + 2 tr(D^T K). Minimizing the
// Frobenius objective over seed-fixing permutations is the same as
// maximizing this over permutation matrices D, because the squared terms
// do not depend on the assignment.
inline double relaxed_similarity(const SeedSplit& sp, const Eigen::MatrixXd& d) {
    return (sp.p22 * d * sp.b22).cwiseProduct(d).sum() + 2.0 * sp.k.cwiseProduct(d).sum();
}

// Permutation with every seed fixed and nonseed position nonseeds[c]
// sent to vertex nonseeds[assign_col_to_row(c)].
inline Permutation assemble_seeded(const SeedSplit& sp, int n,
                                   const std::vector<int>& col_to_row) {
    std::vector<int> map(static_cast<std::size_t>(n));
    for (int sid : sp.seeds) map[static_cast<std::size_t>(sid)] = sid;
    for (std::size_t c = 0; c < sp.nonseeds.size(); ++c)
        map[static_cast<std::size_t>(sp.nonseeds[c])] =
            sp.nonseeds[static_cast<std::size_t>(col_to_row[c])];
    return Permutation(std::move(map));
}

// Max-LAP projection of a nonnegative-ish matrix onto permutations,
// returned as col -> row of the chosen entries.
inline std::vector<int> project_to_assignment(const Eigen::MatrixXd& d) {
    const LapResult lap = solve_lap(CostMatrix{d, Sense::Max});
    std::vector<int> col_to_row(static_cast<std::size_t>(d.rows()));
    for (int r = 0; r < static_cast<int>(d.rows()); ++r)
        col_to_row[static_cast<std::size_t>(lap.assignment[r])] = r;
    return col_to_row;
}

}  // namespace detail

// Frank-Wolfe ascent over doubly stochastic matrices for the seeded
// quadratic assignment relaxation, with a Max-LAP rounding step at the
// end. Deterministic for a fixed input. The returned objective can only
// tie or beat the projection of the starting point because both
// candidate roundings are scored and the better one is kept.
inline FaqResult seeded_faq(const Eigen::MatrixXd& p_hat, const Graph& b_tilde,
                            const SeedSet& seeds, const FaqOptions& opts = {}) {
    detail::check_qap_inputs(p_hat, b_tilde);
    opts.validate();
    const int n = b_tilde.n();
    detail::SeedSplit sp = detail::split_blocks(p_hat, b_tilde, seeds);
    const int m = static_cast<int>(sp.nonseeds.size());

    Eigen::MatrixXd d;
    if (opts.init == FaqOptions::Init::Barycenter) {
        d = Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    } else {
        d = *opts.initial_ds;
        if (d.rows() != m || d.cols() != m)
            throw std::invalid_argument("initial matrix order must equal the non-seed count");
        if (!is_doubly_stochastic(d))
            throw std::invalid_argument("initial matrix is not doubly stochastic");
    }
    const std::vector<int> initial_rounding = detail::project_to_assignment(d);

    FaqResult res;
    double f = detail::relaxed_similarity(sp, d);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        const Eigen::MatrixXd anchor = sp.p22 * d * sp.b22 + sp.k;
        const Eigen::MatrixXd grad = 2.0 * anchor;
        const LapResult dir = solve_lap(CostMatrix{grad, Sense::Max});
        // R = direction - d; the step stays inside the polytope for any
        // gamma in [0, 1].
        Eigen::MatrixXd r = -d;
        for (int row = 0; row < m; ++row) r(row, dir.assignment[row]) += 1.0;
        const double a = (sp.p22 * r * sp.b22).cwiseProduct(r).sum();
        const double b = grad.cwiseProduct(r).sum();
        double gamma;
        if (a < 0.0) {
            gamma = std::clamp(-b / (2.0 * a), 0.0, 1.0);
        } else if (a > 0.0) {
            gamma = (a + b >= 0.0) ? 1.0 : 0.0;  // ties prefer the vertex step
        } else {
            gamma = (b >= 0.0) ? 1.0 : 0.0;
        }
        if (gamma == 0.0) break;
        d += gamma * r;
        const double f_new = detail::relaxed_similarity(sp, d);
        res.trace.push_back({f_new, gamma});
        ++res.iters;
        const bool settled = std::abs(f_new - f) <= opts.rel_tol * std::max(1.0, std::abs(f));
        f = f_new;
        if (settled) break;
    }

    const std::vector<int> final_rounding = detail::project_to_assignment(d);
    Permutation q_final = detail::assemble_seeded(sp, n, final_rounding);
    Permutation q_init = detail::assemble_seeded(sp, n, initial_rounding);
    const double obj_final = qap_objective(p_hat, b_tilde, q_final);
    const double obj_init = qap_objective(p_hat, b_tilde, q_init);
    if (obj_init < obj_final) {
        res.permutation = std::move(q_init);
        res.objective = obj_init;
        res.used_initial_projection = true;
    } else {
        res.permutation = std::move(q_final);
        res.objective = obj_final;
    }
    return res;
}

inline FaqResult seeded_faq(const ProbMatrix& p_hat, const Graph& b_tilde, const SeedSet& seeds,
                            const FaqOptions& opts = {}) {
    return seeded_faq(p_hat.values(), b_tilde, seeds, opts);
}

inline FaqResult seeded_faq(const Graph& p_hat, const Graph& b_tilde, const SeedSet& seeds,
                            const FaqOptions& opts = {}) {
    return seeded_faq(p_hat.adj(), b_tilde, seeds, opts);
}

struct QapBruteResult {
    Permutation permutation;
    double objective;
};

// Exhaustive seeded reference, capped at 8 free vertices. Ties go to the
// lexicographically smallest assignment vector.
inline QapBruteResult brute_force_qap(const Eigen::MatrixXd& p_hat, const Graph& b_tilde,
                                      const SeedSet& seeds) {
    detail::check_qap_inputs(p_hat, b_tilde);
    const int n = b_tilde.n();
    seeds.check_within(n);
    const std::vector<int> nonseeds = seeds.complement(n);
    const int m = static_cast<int>(nonseeds.size());
    if (m < 1) throw std::invalid_argument("no non-seed vertices left to match");
    if (m > 8) throw std::invalid_argument("brute-force matching is capped at 8 free vertices");

    std::vector<int> images = nonseeds;  // images[k] = image of position nonseeds[k]
    std::vector<int> map(static_cast<std::size_t>(n));
    const auto build = [&]() {
        for (int sid : seeds.ids()) map[static_cast<std::size_t>(sid)] = sid;
        for (int k = 0; k < m; ++k)
            map[static_cast<std::size_t>(nonseeds[static_cast<std::size_t>(k)])] =
                images[static_cast<std::size_t>(k)];
        return Permutation(map);
    };

    Permutation best = build();
    double best_obj = qap_objective(p_hat, b_tilde, best);
    while (std::next_permutation(images.begin(), images.end())) {
        const Permutation q = build();
        const double obj = qap_objective(p_hat, b_tilde, q);
        if (obj < best_obj) {
            best = q;
            best_obj = obj;
        }
    }
    return {std::move(best), best_obj};
}

inline QapBruteResult brute_force_qap(const ProbMatrix& p_hat, const Graph& b_tilde,
                                      const SeedSet& seeds) {
    return brute_force_qap(p_hat.values(), b_tilde, seeds);
}

inline QapBruteResult brute_force_qap(const Graph& p_hat, const Graph& b_tilde,
                                      const SeedSet& seeds) {
    return brute_force_qap(p_hat.adj(), b_tilde, seeds);
}

}  // namespace covmatch

#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "covmatch/assign.hpp"
#include "covmatch/covariates.hpp"
#include "covmatch/glm.hpp"
#include "covmatch/graph.hpp"
#include "covmatch/qap.hpp"

namespace covmatch {

enum class MethodKind { CovQap, CovNeigh, NoCovQap, NoCovNeigh, AvgSim };

inline const char* method_name(MethodKind m) {
    switch (m) {
        case MethodKind::CovQap: return "cov-qap";
        case MethodKind::CovNeigh: return "cov-neigh";
        case MethodKind::NoCovQap: return "no-cov-qap";
        case MethodKind::NoCovNeigh: return "no-cov-neigh";
        case MethodKind::AvgSim: return "avg-sim";
    }
    throw std::logic_error("unknown method");
}

inline std::optional<MethodKind> parse_method(std::string_view name) {
    if (name == "cov-qap") return MethodKind::CovQap;
    if (name == "cov-neigh") return MethodKind::CovNeigh;
    if (name == "no-cov-qap") return MethodKind::NoCovQap;
    if (name == "no-cov-neigh") return MethodKind::NoCovNeigh;
    if (name == "avg-sim") return MethodKind::AvgSim;
    return std::nullopt;
}

struct MatchResult {
    Permutation permutation;
    std::string method;
    // Frobenius distance (minimized) for the qap-backed methods, seed
    // neighborhood similarity (maximized) for the neigh-backed ones.
    double objective = 0.0;
    std::optional<GlmFit> fit;
    std::optional<long> prob_clamp_count;  // set by the GLM-backed methods
    double wall_time_sec = 0.0;

    MatchResult() : permutation(Permutation::identity(1)) {}
};

namespace detail {

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void check_match_inputs(const Graph& a, const Graph& b_tilde, const SeedSet& seeds) {
    if (a.n() != b_tilde.n()) throw std::invalid_argument("graphs differ in order");
    seeds.check_within(a.n());
}

}  // namespace detail

// Regression block over seed pairs: the rows where the correspondence is
// known, so the response can be read straight off the shuffled graph.
inline GlmData seed_block_data(const Graph& a, const Graph& b_tilde, const CovariateBundle& c,
                               const SeedSet& seeds) {
    detail::check_match_inputs(a, b_tilde, seeds);
    c.check_compatible(a.n());
    const auto pairs = seed_pairs(seeds);
    if (pairs.empty()) throw std::invalid_argument("insufficient seeds: no seed pairs to fit on");
    GlmData data;
    data.X.resize(static_cast<Eigen::Index>(pairs.size()), c.dim());
    data.y.resize(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        data.X.row(static_cast<Eigen::Index>(k)) = build_design_row(a, c, i, j).transpose();
        data.y(static_cast<Eigen::Index>(k)) = b_tilde.at(i, j);
    }
    return data;
}

struct NeighResult {
    Permutation permutation;
    double objective;  // maximized seed neighborhood similarity
};

// Linear matcher: score position k against vertex v by how similarly
// they connect to the seeds, then solve one Max assignment. Needs no
// relaxation because the cross term is linear in the permutation.
inline NeighResult neigh_lap_match(const Eigen::MatrixXd& p_hat, const Eigen::MatrixXd& b_tilde,
                                   const SeedSet& seeds) {
    if (p_hat.rows() != p_hat.cols() || b_tilde.rows() != b_tilde.cols())
        throw std::invalid_argument("matcher inputs must be square");
    if (p_hat.rows() != b_tilde.rows())
        throw std::invalid_argument("matcher inputs differ in order");
    const int n = static_cast<int>(p_hat.rows());
    seeds.check_within(n);
    if (seeds.empty())
        throw std::invalid_argument("seed neighborhood matching needs at least one seed");
    if (seeds.size() >= n)
        throw std::invalid_argument("no non-seed vertices left to match");
    const std::vector<int> nonseeds = seeds.complement(n);
    const int m = static_cast<int>(nonseeds.size());
    const int s = seeds.size();

    Eigen::MatrixXd b21(m, s), p21(m, s);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < s; ++c) {
            b21(r, c) = b_tilde(nonseeds[static_cast<std::size_t>(r)],
                                seeds.ids()[static_cast<std::size_t>(c)]);
            p21(r, c) = p_hat(nonseeds[static_cast<std::size_t>(r)],
                              seeds.ids()[static_cast<std::size_t>(c)]);
        }
    // score(k, v): position row k of the shuffled graph against candidate
    // vertex v, both described by their seed adjacency profiles.
    const Eigen::MatrixXd score = b21 * p21.transpose();
    const LapResult lap = solve_lap(CostMatrix{score, Sense::Max});

    std::vector<int> map(static_cast<std::size_t>(n));
    for (int sid : seeds.ids()) map[static_cast<std::size_t>(sid)] = sid;
    for (int k = 0; k < m; ++k)
        map[static_cast<std::size_t>(nonseeds[static_cast<std::size_t>(k)])] =
            nonseeds[static_cast<std::size_t>(lap.assignment[k])];
    return {Permutation(std::move(map)), lap.objective};
}

namespace detail {

inline GlmFit fit_seed_block(const Graph& a, const Graph& b_tilde, const CovariateBundle& c,
                             const SeedSet& seeds, LinkKind link, const GlmOptions& glm_opts) {
    if (seeds.size() < c.dim())
        throw std::invalid_argument(
            "insufficient seeds: " + std::to_string(seeds.size()) + " seeds for a " +
            std::to_string(c.dim()) + "-parameter fit");
    const GlmData data = seed_block_data(a, b_tilde, c, seeds);
    if (data.X.rows() < c.dim())
        throw std::invalid_argument("insufficient seeds: fewer seed pairs than parameters");
    return fit_glm(data, link, glm_opts);
}

}  // namespace detail

// Fit on the seed block, predict every pairwise probability, then solve
// the seeded quadratic assignment problem against the shuffled graph.
inline MatchResult cov_qap(const Graph& a, const Graph& b_tilde, const CovariateBundle& c,
                           const SeedSet& seeds, LinkKind link, const FaqOptions& faq_opts = {},
                           const GlmOptions& glm_opts = {}) {
    const detail::WallTimer timer;
    detail::check_match_inputs(a, b_tilde, seeds);
    MatchResult res;
    res.method = method_name(MethodKind::CovQap);
    res.fit = detail::fit_seed_block(a, b_tilde, c, seeds, link, glm_opts);
    const ProbMatrix p = predict_prob_matrix(*res.fit, a, c);
    res.prob_clamp_count = p.clamp_count();
    const FaqResult faq = seeded_faq(p, b_tilde, seeds, faq_opts);
    res.permutation = faq.permutation;
    res.objective = faq.objective;
    res.wall_time_sec = timer.seconds();
    return res;
}

// Same fit, but match non-seeds by their fitted seed neighborhoods.
inline MatchResult cov_neigh(const Graph& a, const Graph& b_tilde, const CovariateBundle& c,
                             const SeedSet& seeds, LinkKind link,
                             const GlmOptions& glm_opts = {}) {
    const detail::WallTimer timer;
    detail::check_match_inputs(a, b_tilde, seeds);
    MatchResult res;
    res.method = method_name(MethodKind::CovNeigh);
    res.fit = detail::fit_seed_block(a, b_tilde, c, seeds, link, glm_opts);
    const ProbMatrix p = predict_prob_matrix(*res.fit, a, c);
    res.prob_clamp_count = p.clamp_count();
    const NeighResult nr = neigh_lap_match(p.values(), b_tilde.adj(), seeds);
    res.permutation = nr.permutation;
    res.objective = nr.objective;
    res.wall_time_sec = timer.seconds();
    return res;
}

// Covariate-blind baseline: the observed adjacency stands in for the
// probability matrix.
inline MatchResult no_cov_qap(const Graph& a, const Graph& b_tilde, const SeedSet& seeds,
                              const FaqOptions& faq_opts = {}) {
    const detail::WallTimer timer;
    detail::check_match_inputs(a, b_tilde, seeds);
    MatchResult res;
    res.method = method_name(MethodKind::NoCovQap);
    const FaqResult faq = seeded_faq(a, b_tilde, seeds, faq_opts);
    res.permutation = faq.permutation;
    res.objective = faq.objective;
    res.wall_time_sec = timer.seconds();
    return res;
}

inline MatchResult no_cov_neigh(const Graph& a, const Graph& b_tilde, const SeedSet& seeds) {
    const detail::WallTimer timer;
    detail::check_match_inputs(a, b_tilde, seeds);
    MatchResult res;
    res.method = method_name(MethodKind::NoCovNeigh);
    const NeighResult nr = neigh_lap_match(a.adj(), b_tilde.adj(), seeds);
    res.permutation = nr.permutation;
    res.objective = nr.objective;
    res.wall_time_sec = timer.seconds();
    return res;
}

// Baseline that averages the adjacency with the mean edge covariate and
// matches on the blend. Covariates enter without any model.
inline MatchResult avg_sim(const Graph& a, const Graph& b_tilde, const CovariateBundle& c,
                           const SeedSet& seeds, const FaqOptions& faq_opts = {}) {
    const detail::WallTimer timer;
    detail::check_match_inputs(a, b_tilde, seeds);
    c.check_compatible(a.n());
    if (c.d1() < 1)
        throw std::invalid_argument("similarity averaging needs at least one edge covariate");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(a.n(), a.n());
    for (const auto& m : c.edge_covs()) mean += m;
    mean /= static_cast<double>(c.d1());
    const Eigen::MatrixXd blend = 0.5 * (a.adj() + mean);
    MatchResult res;
    res.method = method_name(MethodKind::AvgSim);
    const FaqResult faq = seeded_faq(blend, b_tilde, seeds, faq_opts);
    res.permutation = faq.permutation;
    res.objective = faq.objective;
    res.wall_time_sec = timer.seconds();
    return res;
}

inline MatchResult run_method(MethodKind method, const Graph& a, const Graph& b_tilde,
                              const CovariateBundle& c, const SeedSet& seeds, LinkKind link,
                              const FaqOptions& faq_opts = {}, const GlmOptions& glm_opts = {}) {
    switch (method) {
        case MethodKind::CovQap: return cov_qap(a, b_tilde, c, seeds, link, faq_opts, glm_opts);
        case MethodKind::CovNeigh: return cov_neigh(a, b_tilde, c, seeds, link, glm_opts);
        case MethodKind::NoCovQap: return no_cov_qap(a, b_tilde, seeds, faq_opts);
        case MethodKind::NoCovNeigh: return no_cov_neigh(a, b_tilde, seeds);
        case MethodKind::AvgSim: return avg_sim(a, b_tilde, c, seeds, faq_opts);
    }
    throw std::logic_error("unknown method");
}

}  // namespace covmatch

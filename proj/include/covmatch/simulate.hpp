#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "covmatch/covariates.hpp"
#include "covmatch/glm.hpp"
#include "covmatch/graph.hpp"
#include "covmatch/matchers.hpp"
#include "covmatch/qap.hpp"
#include "covmatch/rng.hpp"

namespace covmatch {

// Direction of the adjacency effect in the synthetic model: Easy keeps
// correlated pairs more likely to connect, Difficult flips the sign so a
// dense base rate minus the adjacency effect rewards methods that use
// the covariate signal.
enum class SignKind { Easy, Difficult };

inline const char* sign_name(SignKind s) {
    return s == SignKind::Easy ? "easy" : "difficult";
}

struct SimConfig {
    int n = 150;
    double p = 0.1;  // edge probability of the base graph
    double q = 0.1;  // edge probability of the binary covariate graph
    double theta0 = 0.01;
    double alpha = 0.55;  // total signal strength
    double gamma = 0.45;  // share of signal carried by the covariate
    SignKind sign = SignKind::Easy;
    int n_seeds = 50;
    int n_reps = 10;
    LinkKind link = LinkKind::Identity;
    std::uint64_t base_rng_seed = 1;
    FaqOptions faq;
    GlmOptions glm;

    double theta1() const {
        const double mag = alpha * (1.0 - gamma);
        return sign == SignKind::Easy ? mag : -mag;
    }
    double theta2() const { return alpha * gamma; }

    void validate() const {
        if (n < 2) throw std::invalid_argument("simulation needs n >= 2");
        if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0))
            throw std::invalid_argument("edge probabilities must lie in [0, 1]");
        if (!(alpha >= 0.0) || !(gamma >= 0.0 && gamma <= 1.0))
            throw std::invalid_argument("alpha must be >= 0 and gamma in [0, 1]");
        if (n_seeds < 0 || n_seeds >= n)
            throw std::invalid_argument("seed count must lie in [0, n)");
        if (n_reps < 1) throw std::invalid_argument("need at least one replication");
        faq.validate();
        glm.validate();
    }
};

inline Graph gen_er(int n, double p, Rng& rng) {
    if (n < 1) throw std::invalid_argument("graph needs at least one vertex");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("edge probability outside [0, 1]");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (rng.bernoulli(p)) {
                m(i, j) = 1.0;
                m(j, i) = 1.0;
            }
    return Graph(std::move(m));
}

// Affine edge probabilities theta0 + theta1 A + theta2 Y, clamped into
// [0, 1]. The clamp count is a model misspecification alarm.
inline ProbMatrix build_p_matrix(const Graph& a, const Graph& y, double theta0, double theta1,
                                 double theta2) {
    if (a.n() != y.n()) throw std::invalid_argument("graphs differ in order");
    const int n = a.n();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    long clamps = 0;
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            double v = theta0 + theta1 * a.at(i, j) + theta2 * y.at(i, j);
            if (v < 0.0) {
                v = 0.0;
                ++clamps;
            } else if (v > 1.0) {
                v = 1.0;
                ++clamps;
            }
            p(i, j) = v;
            p(j, i) = v;
        }
    return ProbMatrix(std::move(p), clamps);
}

inline Graph sample_graph(const ProbMatrix& p, Rng& rng) {
    const int n = p.n();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (rng.bernoulli(p.at(i, j))) {
                m(i, j) = 1.0;
                m(j, i) = 1.0;
            }
    return Graph(std::move(m));
}

// Uniformly random permutation that fixes every seed, applied to b.
// Returns the shuffled graph together with the ground truth, so callers
// can score recovered permutations against it.
inline std::pair<Graph, Permutation> shuffle_nonseeds(const Graph& b, const SeedSet& seeds,
                                                      Rng& rng) {
    const int n = b.n();
    seeds.check_within(n);
    std::vector<int> nonseeds = seeds.complement(n);
    std::vector<int> images = nonseeds;
    rng.shuffle(images);
    std::vector<int> map(static_cast<std::size_t>(n));
    for (int sid : seeds.ids()) map[static_cast<std::size_t>(sid)] = sid;
    for (std::size_t k = 0; k < nonseeds.size(); ++k)
        map[static_cast<std::size_t>(nonseeds[k])] = images[k];
    Permutation q_star(std::move(map));
    return {apply_permutation(b, q_star), std::move(q_star)};
}

struct RepRecord {
    int rep = 0;
    MethodKind method = MethodKind::CovQap;
    double matching_error = 0.0;
    double objective = 0.0;
    double wall_time_sec = 0.0;
    long p_clamp_count = 0;  // clamped pairs in the generating matrix
};

struct MethodSummary {
    MethodKind method = MethodKind::CovQap;
    int reps = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;  // sample standard deviation
    double mean_wall_time_sec = 0.0;
};

struct ExperimentSummary {
    SimConfig config;
    std::vector<RepRecord> records;  // one per method x rep
    std::vector<MethodSummary> methods;
};

// Aggregation is forced into a canonical order first, so summaries do
// not depend on how the records happened to be produced.
inline std::vector<MethodSummary> aggregate(std::vector<RepRecord> records,
                                            const std::vector<MethodKind>& methods) {
    std::sort(records.begin(), records.end(), [](const RepRecord& a, const RepRecord& b) {
        if (a.method != b.method) return static_cast<int>(a.method) < static_cast<int>(b.method);
        return a.rep < b.rep;
    });
    std::vector<MethodSummary> out;
    for (MethodKind mk : methods) {
        MethodSummary s;
        s.method = mk;
        for (const auto& r : records) {
            if (r.method != mk) continue;
            ++s.reps;
            s.mean_error += r.matching_error;
            s.mean_wall_time_sec += r.wall_time_sec;
        }
        if (s.reps > 0) {
            s.mean_error /= s.reps;
            s.mean_wall_time_sec /= s.reps;
            double ss = 0.0;
            for (const auto& r : records) {
                if (r.method != mk) continue;
                const double d = r.matching_error - s.mean_error;
                ss += d * d;
            }
            s.sd_error = s.reps > 1 ? std::sqrt(ss / (s.reps - 1)) : 0.0;
        }
        out.push_back(s);
    }
    return out;
}

// One synthetic matching experiment: draw base graph and covariate,
// build edge probabilities, sample the second graph, hide the non-seed
// correspondence, run every requested method, and score it. Each
// replication gets its own derived stream, so rep k is reproducible in
// isolation and independent of how many reps run.
inline ExperimentSummary run_experiment(const SimConfig& cfg,
                                        const std::vector<MethodKind>& methods) {
    cfg.validate();
    if (methods.empty()) throw std::invalid_argument("no methods requested");
    ExperimentSummary out;
    out.config = cfg;
    for (int rep = 0; rep < cfg.n_reps; ++rep) {
        Rng rng = Rng::stream(cfg.base_rng_seed, static_cast<std::uint64_t>(rep));
        const Graph a = gen_er(cfg.n, cfg.p, rng);
        const Graph y = gen_er(cfg.n, cfg.q, rng);
        const ProbMatrix p = build_p_matrix(a, y, cfg.theta0, cfg.theta1(), cfg.theta2());
        const Graph b = sample_graph(p, rng);

        std::vector<int> labels(static_cast<std::size_t>(cfg.n));
        std::iota(labels.begin(), labels.end(), 0);
        rng.shuffle(labels);
        labels.resize(static_cast<std::size_t>(cfg.n_seeds));
        const SeedSet seeds(std::move(labels));

        auto [b_tilde, q_star] = shuffle_nonseeds(b, seeds, rng);
        const CovariateBundle bundle({y.adj()}, Eigen::MatrixXd(0, 0), {});

        for (MethodKind mk : methods) {
            const MatchResult r =
                run_method(mk, a, b_tilde, bundle, seeds, cfg.link, cfg.faq, cfg.glm);
            RepRecord rec;
            rec.rep = rep;
            rec.method = mk;
            rec.matching_error = matching_error(r.permutation, q_star, seeds);
            rec.objective = r.objective;
            rec.wall_time_sec = r.wall_time_sec;
            rec.p_clamp_count = p.clamp_count();
            out.records.push_back(rec);
        }
    }
    out.methods = aggregate(out.records, methods);
    return out;
}

}  // namespace covmatch

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "covmatch/qap.hpp"
#include "covmatch/rng.hpp"
#include "helpers.hpp"

using namespace covmatch;
using testing_support::random_graph;
using testing_support::random_seed_set;
using testing_support::random_seeded_permutation;

namespace {

// Permutation matrix Q with Q(q[i], i) = 1, so that (Q^T P Q)(i, j) =
// P(q[i], q[j]). Used as an independent matrix-algebra reference for the
// entrywise objective.
Eigen::MatrixXd perm_matrix(const Permutation& q) {
    const int n = q.n();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) m(q[i], i) = 1.0;
    return m;
}

}  // namespace

TEST_CASE("doubly stochastic check accepts and rejects correctly") {
    CHECK(is_doubly_stochastic(Eigen::MatrixXd::Constant(4, 4, 0.25)));
    CHECK(is_doubly_stochastic(Eigen::MatrixXd::Identity(3, 3)));

    Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(3, 3);
    perm(0, 1) = perm(1, 2) = perm(2, 0) = 1.0;
    CHECK(is_doubly_stochastic(perm));

    Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(2, 2, 0.5);
    neg(0, 0) = -0.5;
    neg(0, 1) = 1.5;
    CHECK_FALSE(is_doubly_stochastic(neg));

    Eigen::MatrixXd bad_sum = Eigen::MatrixXd::Constant(2, 2, 0.4);
    CHECK_FALSE(is_doubly_stochastic(bad_sum));

    CHECK_FALSE(is_doubly_stochastic(Eigen::MatrixXd::Constant(2, 3, 0.5)));

    Eigen::MatrixXd nan = Eigen::MatrixXd::Constant(2, 2, 0.5);
    nan(1, 1) = std::nan("");
    CHECK_FALSE(is_doubly_stochastic(nan));
}

TEST_CASE("qap objective is zero on aligned graphs and matches a matrix reference") {
    Rng rng(71);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 3 + static_cast<int>(rng.below(6));
        const Graph g = random_graph(n, 0.5, rng);
        CHECK(qap_objective(g, g, Permutation::identity(n)) == 0.0);

        // Random similarity matrix (symmetric, zero diagonal) against a
        // random graph under a random permutation.
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) p(i, j) = p(j, i) = rng.uniform01();
        const Graph b = random_graph(n, 0.5, rng);
        const Permutation q = testing_support::random_permutation(n, rng);

        const Eigen::MatrixXd qm = perm_matrix(q);
        const double reference = (qm.transpose() * p * qm - b.adj()).squaredNorm();
        CHECK(qap_objective(p, b, q) == Catch::Approx(reference).margin(1e-10));
    }
}

TEST_CASE("qap objective overloads agree and match edge disagreement counts") {
    Rng rng(73);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 4 + static_cast<int>(rng.below(5));
        const Graph p = random_graph(n, 0.5, rng);
        const Graph b = random_graph(n, 0.5, rng);
        const Permutation q = testing_support::random_permutation(n, rng);

        const double via_graph = qap_objective(p, b, q);
        const double via_matrix = qap_objective(p.adj(), b, q);
        CHECK(via_graph == via_matrix);

        // For 0/1 graphs every ordered disagreeing pair contributes exactly
        // one, so the objective equals the disagreement count between the
        // relabeled first graph and the second.
        const Graph relabeled = apply_permutation(p, q);
        CHECK(via_graph == static_cast<double>(edge_disagreement(relabeled, b)));
    }
}

TEST_CASE("objective plus twice the seeded similarity is constant over seed-fixing permutations") {
    Rng rng(79);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 7;
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) p(i, j) = p(j, i) = rng.uniform01();
        const Graph b = random_graph(n, 0.5, rng);
        const SeedSet seeds = random_seed_set(n, 2, rng);
        const detail::SeedSplit sp = detail::split_blocks(p, b, seeds);
        const int m = static_cast<int>(sp.nonseeds.size());

        double first_constant = 0.0;
        for (int t = 0; t < 8; ++t) {
            const Permutation q = random_seeded_permutation(n, seeds, rng);
            Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
            for (int c = 0; c < m; ++c) {
                const int vertex = q[sp.nonseeds[static_cast<std::size_t>(c)]];
                for (int r = 0; r < m; ++r)
                    if (sp.nonseeds[static_cast<std::size_t>(r)] == vertex) d(r, c) = 1.0;
            }
            const double constant =
                qap_objective(p, b, q) + 2.0 * detail::relaxed_similarity(sp, d);
            if (t == 0)
                first_constant = constant;
            else
                CHECK(constant == Catch::Approx(first_constant).margin(1e-8));
        }
    }
}

TEST_CASE("faq options validate") {
    FaqOptions opts;
    CHECK_NOTHROW(opts.validate());

    FaqOptions bad_iter;
    bad_iter.max_iter = 0;
    CHECK_THROWS_AS(bad_iter.validate(), std::invalid_argument);

    FaqOptions bad_tol;
    bad_tol.rel_tol = 0.0;
    CHECK_THROWS_AS(bad_tol.validate(), std::invalid_argument);

    FaqOptions given_missing;
    given_missing.init = FaqOptions::Init::GivenDS;
    CHECK_THROWS_AS(given_missing.validate(), std::invalid_argument);

    FaqOptions bary_extra;
    bary_extra.initial_ds = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(bary_extra.validate(), std::invalid_argument);
}

TEST_CASE("seeded faq never loses to the brute-force optimum and usually ties it") {
    // Independent 0/1 pairs at n = 7 with two seeds. A pilot run of this
    // exact construction tied the exhaustive optimum in 169 of 200 trials
    // (84.5%); the assertion allows five points of slack below that.
    Rng rng(101);
    const int trials = 200;
    int equal = 0;
    for (int t = 0; t < trials; ++t) {
        const Graph a = random_graph(7, 0.5, rng);
        const Graph b = random_graph(7, 0.5, rng);
        const SeedSet seeds({0, 1});
        const FaqResult f = seeded_faq(a, b, seeds);
        const QapBruteResult br = brute_force_qap(a, b, seeds);

        REQUIRE(f.objective >= br.objective);
        CHECK(qap_objective(a, b, f.permutation) == f.objective);
        for (int sid : seeds.ids()) CHECK(f.permutation[sid] == sid);
        if (f.objective == br.objective) ++equal;
    }
    CHECK(equal >= 159);  // 84.5% pilot minus 5 points
}

TEST_CASE("seeded faq recovers an aligned graph from one seed") {
    // Matching a graph against itself: the identity reaches objective zero,
    // and the seeded ascent found it in 100 of 100 pilot trials.
    Rng rng(303);
    int zero = 0;
    for (int t = 0; t < 100; ++t) {
        const Graph b = random_graph(8, 0.4, rng);
        const FaqResult f = seeded_faq(b, b, SeedSet({0}));
        if (f.objective == 0.0) ++zero;
        CHECK(f.permutation[0] == 0);
    }
    CHECK(zero >= 95);
}

TEST_CASE("similarity trace is non-decreasing with steps in the unit interval") {
    Rng rng(313);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 6 + static_cast<int>(rng.below(5));
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) p(i, j) = p(j, i) = rng.uniform01();
        const Graph b = random_graph(n, 0.5, rng);
        const FaqResult f = seeded_faq(p, b, SeedSet({0, 1}));
        for (std::size_t k = 0; k < f.trace.size(); ++k) {
            CHECK(f.trace[k].gamma > 0.0);
            CHECK(f.trace[k].gamma <= 1.0);
            if (k > 0)
                CHECK(f.trace[k].similarity >= f.trace[k - 1].similarity - 1e-9);
        }
        CHECK(f.iters == static_cast<int>(f.trace.size()));
    }
}

TEST_CASE("result never scores worse than the projected starting point") {
    Rng rng(317);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 7;
        const Graph a = random_graph(n, 0.5, rng);
        const Graph b = random_graph(n, 0.5, rng);
        const SeedSet seeds({0});

        // Identity start: its projection is the identity permutation, so the
        // returned objective may not exceed the identity's.
        FaqOptions opts;
        opts.init = FaqOptions::Init::GivenDS;
        opts.initial_ds = Eigen::MatrixXd::Identity(n - 1, n - 1);
        const FaqResult f = seeded_faq(a, b, seeds, opts);
        CHECK(f.objective <= qap_objective(a, b, Permutation::identity(n)));
    }
}

TEST_CASE("given starting matrices are validated") {
    const Graph a = Graph::complete(4);
    const Graph b = Graph::complete(4);
    const SeedSet seeds({0});

    FaqOptions wrong_order;
    wrong_order.init = FaqOptions::Init::GivenDS;
    wrong_order.initial_ds = Eigen::MatrixXd::Constant(4, 4, 0.25);  // needs order 3
    CHECK_THROWS_WITH(seeded_faq(a, b, seeds, wrong_order),
                      "initial matrix order must equal the non-seed count");

    FaqOptions not_ds;
    not_ds.init = FaqOptions::Init::GivenDS;
    not_ds.initial_ds = Eigen::MatrixXd::Constant(3, 3, 0.5);
    CHECK_THROWS_WITH(seeded_faq(a, b, seeds, not_ds),
                      "initial matrix is not doubly stochastic");
}

TEST_CASE("brute force breaks ties toward the smallest assignment") {
    // A constant similarity matrix makes every seed-fixing permutation
    // score identically, so the lexicographic rule must keep the identity.
    const int n = 6;
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(n, n, 0.5);
    p.diagonal().setZero();
    Rng rng(331);
    const Graph b = random_graph(n, 0.5, rng);
    const QapBruteResult br = brute_force_qap(p, b, SeedSet({2}));
    CHECK(br.permutation == Permutation::identity(n));
}

TEST_CASE("brute force matches a worked three-vertex example") {
    // First graph has edge 0-1, second has edge 0-2, seed 0 fixed. Sending
    // position 1 to vertex 2 lines the single edges up exactly.
    const Graph p = Graph::from_edges(3, {{0, 1}});
    const Graph b = Graph::from_edges(3, {{0, 2}});
    const QapBruteResult br = brute_force_qap(p, b, SeedSet({0}));
    CHECK(br.objective == 0.0);
    CHECK(br.permutation.map() == std::vector<int>{0, 2, 1});

    // The identity leaves both edges unmatched: four ordered disagreements.
    CHECK(qap_objective(p, b, Permutation::identity(3)) == 4.0);
}

TEST_CASE("degenerate seed sets and oversized instances are rejected") {
    const Graph g = Graph::complete(3);
    CHECK_THROWS_WITH(seeded_faq(g, g, SeedSet({0, 1, 2})),
                      "no non-seed vertices left to match");
    CHECK_THROWS_WITH(brute_force_qap(g, g, SeedSet({0, 1, 2})),
                      "no non-seed vertices left to match");

    const Graph big = Graph::complete(10);
    CHECK_THROWS_WITH(brute_force_qap(big, big, SeedSet({0})),
                      "brute-force matching is capped at 8 free vertices");
    CHECK_NOTHROW(brute_force_qap(big, big, SeedSet({0, 1})));
}

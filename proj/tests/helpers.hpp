#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <utility>
#include <vector>

#include "covmatch/graph.hpp"
#include "covmatch/rng.hpp"

namespace testing_support {

inline covmatch::Graph random_graph(int n, double p, covmatch::Rng& rng) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (rng.bernoulli(p)) {
                m(i, j) = 1.0;
                m(j, i) = 1.0;
            }
    return covmatch::Graph(std::move(m));
}

inline covmatch::Permutation random_permutation(int n, covmatch::Rng& rng) {
    std::vector<int> map(static_cast<std::size_t>(n));
    std::iota(map.begin(), map.end(), 0);
    rng.shuffle(map);
    return covmatch::Permutation(std::move(map));
}

// Uniform permutation fixing every seed id.
inline covmatch::Permutation random_seeded_permutation(int n, const covmatch::SeedSet& seeds,
                                                       covmatch::Rng& rng) {
    std::vector<int> nonseeds = seeds.complement(n);
    std::vector<int> images = nonseeds;
    rng.shuffle(images);
    std::vector<int> map(static_cast<std::size_t>(n));
    for (int sid : seeds.ids()) map[static_cast<std::size_t>(sid)] = sid;
    for (std::size_t k = 0; k < nonseeds.size(); ++k)
        map[static_cast<std::size_t>(nonseeds[k])] = images[k];
    return covmatch::Permutation(std::move(map));
}

// k distinct ids drawn from [0, n).
inline covmatch::SeedSet random_seed_set(int n, int k, covmatch::Rng& rng) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(k));
    return covmatch::SeedSet(std::move(ids));
}

}  // namespace testing_support

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covmatch {

// Undirected simple graph on vertices 0..n-1, stored as a dense 0/1
// adjacency matrix. Dense storage is deliberate: the solvers downstream
// (LAP, Frank-Wolfe) are O(n^3) anyway and target n up to a few thousand.
class Graph {
public:
    explicit Graph(Eigen::MatrixXd adj) : adj_(std::move(adj)) { validate(); }

    static Graph empty(int n) {
        require_n(n);
        return Graph(Eigen::MatrixXd::Zero(n, n));
    }

    static Graph complete(int n) {
        require_n(n);
        Eigen::MatrixXd m = Eigen::MatrixXd::Ones(n, n);
        m.diagonal().setZero();
        return Graph(std::move(m));
    }

    static Graph from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
        require_n(n);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (const auto& [u, v] : edges) {
            if (u < 0 || u >= n || v < 0 || v >= n)
                throw std::invalid_argument("edge endpoint out of range: (" +
                                            std::to_string(u) + ", " + std::to_string(v) + ")");
            if (u == v)
                throw std::invalid_argument("self-loop at vertex " + std::to_string(u));
            m(u, v) = 1.0;
            m(v, u) = 1.0;
        }
        return Graph(std::move(m));
    }

    int n() const { return static_cast<int>(adj_.rows()); }
    const Eigen::MatrixXd& adj() const { return adj_; }
    double at(int i, int j) const { return adj_(i, j); }

    int degree(int i) const { return static_cast<int>(adj_.row(i).sum()); }
    long edge_count() const { return static_cast<long>(adj_.sum()) / 2; }

private:
    static void require_n(int n) {
        if (n < 1) throw std::invalid_argument("graph needs at least one vertex");
    }

    void validate() const {
        if (adj_.rows() != adj_.cols())
            throw std::invalid_argument("adjacency matrix must be square");
        const int n = static_cast<int>(adj_.rows());
        require_n(n);
        for (int i = 0; i < n; ++i) {
            if (adj_(i, i) != 0.0)
                throw std::invalid_argument("nonzero diagonal at vertex " + std::to_string(i));
            for (int j = i + 1; j < n; ++j) {
                const double x = adj_(i, j);
                if (x != 0.0 && x != 1.0)
                    throw std::invalid_argument("adjacency entries must be exactly 0 or 1");
                if (x != adj_(j, i))
                    throw std::invalid_argument("adjacency matrix must be symmetric");
            }
        }
    }

    Eigen::MatrixXd adj_;
};

// Bijection on {0..n-1}. map()[i] is the image of i.
//
// Orientation convention, worked out once so nobody reintroduces the
// transpose bug. Let g be the path 0-1, 1-2 on n=3 and q.map() = {2, 0, 1}.
// Position i of the relabeled graph holds what vertex q[i] looked like:
//   apply_permutation(g, q).at(i, j) == g.at(q[i], q[j]).
// Vertex 0 sits at position 1 and vertex 1 at position 2, so edge 0-1
// lands at 1-2; edge 1-2 lands at 2-0. The result has edges {0-2, 1-2}.
// invert_permutation(q).map() = {1, 2, 0} undoes it.
class Permutation {
public:
    explicit Permutation(std::vector<int> map) : map_(std::move(map)) { validate(); }

    static Permutation identity(int n) {
        if (n < 1) throw std::invalid_argument("permutation needs n >= 1");
        std::vector<int> m(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i;
        return Permutation(std::move(m));
    }

    int n() const { return static_cast<int>(map_.size()); }
    int operator[](int i) const { return map_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& map() const { return map_; }

    bool fixes(int i) const { return map_[static_cast<std::size_t>(i)] == i; }

    bool operator==(const Permutation& o) const { return map_ == o.map_; }
    bool operator!=(const Permutation& o) const { return map_ != o.map_; }

private:
    void validate() const {
        const int n = static_cast<int>(map_.size());
        if (n < 1) throw std::invalid_argument("permutation needs n >= 1");
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            const int v = map_[static_cast<std::size_t>(i)];
            if (v < 0 || v >= n)
                throw std::invalid_argument("permutation image out of range at index " +
                                            std::to_string(i));
            if (seen[static_cast<std::size_t>(v)])
                throw std::invalid_argument("permutation repeats image " + std::to_string(v));
            seen[static_cast<std::size_t>(v)] = 1;
        }
    }

    std::vector<int> map_;
};

// Strictly increasing set of vertex ids whose correspondence is known.
class SeedSet {
public:
    SeedSet() = default;

    explicit SeedSet(std::vector<int> ids) : ids_(std::move(ids)) {
        std::sort(ids_.begin(), ids_.end());
        for (std::size_t k = 0; k < ids_.size(); ++k) {
            if (ids_[k] < 0)
                throw std::invalid_argument("negative seed id " + std::to_string(ids_[k]));
            if (k > 0 && ids_[k] == ids_[k - 1])
                throw std::invalid_argument("duplicate seed id " + std::to_string(ids_[k]));
        }
    }

    int size() const { return static_cast<int>(ids_.size()); }
    bool empty() const { return ids_.empty(); }
    const std::vector<int>& ids() const { return ids_; }

    bool contains(int v) const {
        return std::binary_search(ids_.begin(), ids_.end(), v);
    }

    void check_within(int n) const {
        if (!ids_.empty() && ids_.back() >= n)
            throw std::invalid_argument("seed id " + std::to_string(ids_.back()) +
                                        " out of range for n = " + std::to_string(n));
    }

    // Non-seed ids in ascending order.
    std::vector<int> complement(int n) const {
        check_within(n);
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(n) - ids_.size());
        std::size_t k = 0;
        for (int v = 0; v < n; ++v) {
            if (k < ids_.size() && ids_[k] == v) {
                ++k;
            } else {
                out.push_back(v);
            }
        }
        return out;
    }

private:
    std::vector<int> ids_;
};

inline Graph apply_permutation(const Graph& g, const Permutation& q) {
    if (g.n() != q.n())
        throw std::invalid_argument("permutation size does not match graph order");
    const int n = g.n();
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = g.at(q[i], q[j]);
    return Graph(std::move(m));
}

inline Permutation invert_permutation(const Permutation& q) {
    std::vector<int> inv(static_cast<std::size_t>(q.n()));
    for (int i = 0; i < q.n(); ++i) inv[static_cast<std::size_t>(q[i])] = i;
    return Permutation(std::move(inv));
}

// Fraction of non-seed vertices whose image under q_hat differs from
// q_star. Both permutations must fix every seed; a matcher that moved a
// seed has a bug upstream and gets an exception, not a score.
inline double matching_error(const Permutation& q_hat, const Permutation& q_star,
                             const SeedSet& seeds) {
    if (q_hat.n() != q_star.n())
        throw std::invalid_argument("permutations differ in size");
    const int n = q_hat.n();
    seeds.check_within(n);
    for (int sid : seeds.ids()) {
        if (!q_hat.fixes(sid) || !q_star.fixes(sid))
            throw std::invalid_argument("permutation does not fix seed " + std::to_string(sid));
    }
    const int s = seeds.size();
    if (n == s) return 0.0;
    int wrong = 0;
    for (int i = 0; i < n; ++i) {
        if (seeds.contains(i)) continue;
        if (q_hat[i] != q_star[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(n - s);
}

// Squared Frobenius norm of the adjacency difference. Counts each
// disagreeing unordered pair twice, hence always even.
inline long edge_disagreement(const Graph& a, const Graph& b) {
    if (a.n() != b.n()) throw std::invalid_argument("graphs differ in order");
    long total = 0;
    for (int i = 0; i < a.n(); ++i)
        for (int j = 0; j < a.n(); ++j)
            if (a.at(i, j) != b.at(i, j)) ++total;
    return total;
}

}  // namespace covmatch

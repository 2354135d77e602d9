#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <unistd.h>

#include "covmatch/covariates.hpp"
#include "covmatch/glm.hpp"
#include "covmatch/graph.hpp"
#include "covmatch/matchers.hpp"
#include "covmatch/qap.hpp"
#include "covmatch/simulate.hpp"

namespace covmatch {

// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string strip_comment_and_trim(std::string line) {
    if (const auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = line.find_last_not_of(" \t\r\n");
    return line.substr(first, last - first + 1);
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(strip_comment_and_trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

inline double parse_double(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("not a number in " + where + ": '" + tok + "'");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// File formats. All invented plumbing, documented in the README:
//   graphs      one undirected edge per line, "u v" string labels
//   seeds       CSV rows "label-in-A,label-in-B"
//   node covs   CSV with header; first column is the vertex label
//   edge covs   coordinate triplets "u v value"; unlisted pairs are 0
// '#' starts a comment everywhere; blank lines are skipped.
// ---------------------------------------------------------------------------

struct EdgeListFile {
    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<std::string> warnings;
};

inline EdgeListFile read_edge_list(const std::string& path) {
    auto in = detail::open_or_throw(path);
    EdgeListFile out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = detail::strip_comment_and_trim(raw);
        if (line.empty()) continue;
        const auto toks = detail::split_ws(line);
        if (toks.size() != 2)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected two labels per edge line");
        if (toks[0] == toks[1])
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": self-loop on '" +
                                     toks[0] + "'");
        const std::pair<std::string, std::string> key = std::minmax(toks[0], toks[1]);
        if (!seen.insert(key).second) {
            out.warnings.push_back(path + ":" + std::to_string(lineno) + ": duplicate edge " +
                                   toks[0] + " " + toks[1] + " ignored");
            continue;
        }
        out.edges.emplace_back(toks[0], toks[1]);
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> read_seed_pairs(const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = detail::strip_comment_and_trim(raw);
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'label-in-A,label-in-B'");
        out.emplace_back(fields[0], fields[1]);
    }
    return out;
}

struct NodeCovFile {
    std::vector<std::string> columns;  // covariate names, label column excluded
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
};

inline NodeCovFile read_node_cov_csv(const std::string& path) {
    auto in = detail::open_or_throw(path);
    NodeCovFile out;
    std::string raw;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = detail::strip_comment_and_trim(raw);
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        if (!have_header) {
            if (fields.size() < 2)
                throw std::runtime_error(path + ": header needs a label column and at least one covariate");
            out.columns.assign(fields.begin() + 1, fields.end());
            have_header = true;
            continue;
        }
        if (fields.size() != out.columns.size() + 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": row width does not match header");
        if (fields[0].empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty label");
        std::vector<double> row;
        row.reserve(out.columns.size());
        for (std::size_t k = 1; k < fields.size(); ++k) {
            if (fields[k].empty())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": missing value for '" + out.columns[k - 1] + "'");
            row.push_back(detail::parse_double(fields[k], path + ":" + std::to_string(lineno)));
        }
        out.labels.push_back(fields[0]);
        out.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::runtime_error(path + ": empty node covariate file");
    return out;
}

inline std::vector<std::tuple<std::string, std::string, double>> read_edge_cov_triplets(
    const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::vector<std::tuple<std::string, std::string, double>> out;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = detail::strip_comment_and_trim(raw);
        if (line.empty()) continue;
        const auto toks = detail::split_ws(line);
        if (toks.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'u v value'");
        out.emplace_back(toks[0], toks[1],
                         detail::parse_double(toks[2], path + ":" + std::to_string(lineno)));
    }
    return out;
}

// Whitespace-separated numeric rows; used by the oracle subcommand.
inline Eigen::MatrixXd read_dense_matrix(const std::string& path) {
    auto in = detail::open_or_throw(path);
    std::vector<std::vector<double>> rows;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = detail::strip_comment_and_trim(raw);
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& tok : detail::split_ws(line))
            row.push_back(detail::parse_double(tok, path + ":" + std::to_string(lineno)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged matrix row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": empty matrix file");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

// ---------------------------------------------------------------------------
// Emitters, for fixtures and round-trip checks.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_label(const std::string& label) {
    if (label.empty()) throw std::invalid_argument("empty vertex label");
    for (char ch : label)
        if (ch == ',' || ch == '#' || std::isspace(static_cast<unsigned char>(ch)))
            throw std::invalid_argument("label '" + label +
                                        "' contains whitespace, ',' or '#'");
}

}  // namespace detail

inline std::string edge_list_text(const Graph& g, const std::vector<std::string>& labels) {
    if (static_cast<int>(labels.size()) != g.n())
        throw std::invalid_argument("label count does not match graph order");
    for (const auto& l : labels) detail::check_label(l);
    std::string out;
    for (int i = 0; i < g.n(); ++i)
        for (int j = i + 1; j < g.n(); ++j)
            if (g.at(i, j) != 0.0)
                out += labels[static_cast<std::size_t>(i)] + " " +
                       labels[static_cast<std::size_t>(j)] + "\n";
    return out;
}

inline std::string seed_pairs_text(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    for (const auto& [a, b] : pairs) {
        detail::check_label(a);
        detail::check_label(b);
        out += a + "," + b + "\n";
    }
    return out;
}

inline std::string node_cov_text(const std::vector<std::string>& columns,
                                 const std::vector<std::string>& labels,
                                 const Eigen::MatrixXd& table) {
    if (table.rows() != static_cast<Eigen::Index>(labels.size()) ||
        table.cols() != static_cast<Eigen::Index>(columns.size()))
        throw std::invalid_argument("node covariate table shape does not match labels/columns");
    std::string out = "label";
    for (const auto& c : columns) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        detail::check_label(labels[i]);
        out += labels[i];
        for (Eigen::Index k = 0; k < table.cols(); ++k)
            out += "," + format_double(table(static_cast<Eigen::Index>(i), k));
        out += "\n";
    }
    return out;
}

inline std::string edge_cov_text(const Eigen::MatrixXd& m, const std::vector<std::string>& labels) {
    if (m.rows() != m.cols() || m.rows() != static_cast<Eigen::Index>(labels.size()))
        throw std::invalid_argument("edge covariate shape does not match labels");
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != 0.0)
                out += labels[static_cast<std::size_t>(i)] + " " +
                       labels[static_cast<std::size_t>(j)] + " " + format_double(m(i, j)) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Input assembly for the match command.
// ---------------------------------------------------------------------------

struct InputSpec {
    std::string graph_a_path;
    std::string graph_b_path;
    std::vector<std::string> edge_cov_paths;
    std::optional<std::string> node_cov_path;
    std::vector<TransformKind> transforms;  // one per node covariate column
    std::string seeds_path;
    LinkKind link = LinkKind::Logit;
    MethodKind method = MethodKind::CovQap;
    FaqOptions faq;
    GlmOptions glm;
    std::string output_path;
};

struct LoadedInputs {
    Graph a;
    Graph b_tilde;
    CovariateBundle covs;
    SeedSet seeds;                              // ids in the shared index space
    std::vector<std::string> labels_a;          // index -> label in graph A
    std::vector<std::string> labels_b;          // position -> label in graph B
    std::vector<std::string> covariate_names;   // design columns after (intercept, adjacency)
    std::vector<std::string> warnings;
};

// Remaps both graphs into one 0-based index space. Graph-A labels are
// sorted; each seed's partner inherits its index, so seeds become fixed
// points; the remaining graph-B labels fill the free indices in sorted
// order. Covariates are keyed by graph-A labels.
inline LoadedInputs load_inputs(const InputSpec& spec) {
    std::vector<std::string> warnings;
    const EdgeListFile ea = read_edge_list(spec.graph_a_path);
    const EdgeListFile eb = read_edge_list(spec.graph_b_path);
    warnings.insert(warnings.end(), ea.warnings.begin(), ea.warnings.end());
    warnings.insert(warnings.end(), eb.warnings.begin(), eb.warnings.end());

    std::set<std::string> set_a, set_b;
    for (const auto& [u, v] : ea.edges) {
        set_a.insert(u);
        set_a.insert(v);
    }
    for (const auto& [u, v] : eb.edges) {
        set_b.insert(u);
        set_b.insert(v);
    }
    if (set_a.empty()) throw std::runtime_error(spec.graph_a_path + ": graph has no edges");
    if (set_b.empty()) throw std::runtime_error(spec.graph_b_path + ": graph has no edges");
    if (set_a.size() != set_b.size())
        throw std::runtime_error("graphs have different vertex counts: " +
                                 std::to_string(set_a.size()) + " vs " +
                                 std::to_string(set_b.size()));
    const int n = static_cast<int>(set_a.size());

    std::vector<std::string> labels_a(set_a.begin(), set_a.end());
    std::map<std::string, int> index_a;
    for (int i = 0; i < n; ++i) index_a[labels_a[static_cast<std::size_t>(i)]] = i;

    // Seeds pin the cross-graph index correspondence.
    const auto seed_rows = read_seed_pairs(spec.seeds_path);
    std::map<std::string, int> index_b;
    std::set<std::string> seen_a;
    std::vector<int> seed_ids;
    for (const auto& [la, lb] : seed_rows) {
        const auto it = index_a.find(la);
        if (it == index_a.end())
            throw std::runtime_error("unknown label in seeds: '" + la + "' is not in graph A");
        if (!set_b.count(lb))
            throw std::runtime_error("unknown label in seeds: '" + lb + "' is not in graph B");
        if (!seen_a.insert(la).second)
            throw std::runtime_error("duplicate seed label '" + la + "' on the graph-A side");
        if (!index_b.emplace(lb, it->second).second)
            throw std::runtime_error("duplicate seed label '" + lb + "' on the graph-B side");
        seed_ids.push_back(it->second);
    }
    SeedSet seeds(std::move(seed_ids));

    // Non-seed graph-B labels take the unused indices in sorted order.
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (const auto& [lb, idx] : index_b) taken[static_cast<std::size_t>(idx)] = 1;
    int next_free = 0;
    for (const auto& lb : set_b) {
        if (index_b.count(lb)) continue;
        while (taken[static_cast<std::size_t>(next_free)]) ++next_free;
        taken[static_cast<std::size_t>(next_free)] = 1;
        index_b[lb] = next_free;
    }
    std::vector<std::string> labels_b(static_cast<std::size_t>(n));
    for (const auto& [lb, idx] : index_b) labels_b[static_cast<std::size_t>(idx)] = lb;

    std::vector<std::pair<int, int>> edges_a, edges_b;
    for (const auto& [u, v] : ea.edges) edges_a.emplace_back(index_a.at(u), index_a.at(v));
    for (const auto& [u, v] : eb.edges) edges_b.emplace_back(index_b.at(u), index_b.at(v));
    Graph a = Graph::from_edges(n, edges_a);
    Graph b_tilde = Graph::from_edges(n, edges_b);

    // Edge covariates live on graph-A vertex pairs.
    std::vector<Eigen::MatrixXd> edge_mats;
    std::vector<std::string> names;
    for (const auto& path : spec.edge_cov_paths) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        std::map<std::pair<int, int>, double> seen;
        for (const auto& [u, v, val] : read_edge_cov_triplets(path)) {
            const auto iu = index_a.find(u);
            const auto iv = index_a.find(v);
            if (iu == index_a.end())
                throw std::runtime_error("unknown label in covariates: '" + u + "' in " + path);
            if (iv == index_a.end())
                throw std::runtime_error("unknown label in covariates: '" + v + "' in " + path);
            if (iu->second == iv->second)
                throw std::runtime_error(path + ": diagonal entry for '" + u + "'");
            const std::pair<int, int> key = std::minmax(iu->second, iv->second);
            const auto prev = seen.find(key);
            if (prev != seen.end()) {
                if (prev->second != val)
                    throw std::runtime_error(path + ": conflicting values for pair " + u + " " + v);
                warnings.push_back(path + ": duplicate triplet for pair " + u + " " + v +
                                   " ignored");
                continue;
            }
            seen.emplace(key, val);
            m(iu->second, iv->second) = val;
            m(iv->second, iu->second) = val;
        }
        edge_mats.push_back(std::move(m));
        names.push_back(std::filesystem::path(path).stem().string());
    }

    // Node covariates must cover every graph-A vertex.
    Eigen::MatrixXd node_mat(0, 0);
    std::vector<TransformKind> transforms = spec.transforms;
    if (spec.node_cov_path) {
        const NodeCovFile nf = read_node_cov_csv(*spec.node_cov_path);
        if (transforms.size() != nf.columns.size())
            throw std::runtime_error("need one transform per node covariate column (" +
                                     std::to_string(nf.columns.size()) + " columns, " +
                                     std::to_string(transforms.size()) + " transforms)");
        node_mat = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(nf.columns.size()));
        std::vector<char> have(static_cast<std::size_t>(n), 0);
        for (std::size_t r = 0; r < nf.labels.size(); ++r) {
            const auto it = index_a.find(nf.labels[r]);
            if (it == index_a.end())
                throw std::runtime_error("unknown label in covariates: '" + nf.labels[r] +
                                         "' in " + *spec.node_cov_path);
            if (have[static_cast<std::size_t>(it->second)])
                throw std::runtime_error(*spec.node_cov_path + ": duplicate row for '" +
                                         nf.labels[r] + "'");
            have[static_cast<std::size_t>(it->second)] = 1;
            for (std::size_t k = 0; k < nf.rows[r].size(); ++k)
                node_mat(it->second, static_cast<Eigen::Index>(k)) = nf.rows[r][k];
        }
        for (int i = 0; i < n; ++i)
            if (!have[static_cast<std::size_t>(i)])
                throw std::runtime_error("missing node covariates for label '" +
                                         labels_a[static_cast<std::size_t>(i)] + "'");
        for (std::size_t k = 0; k < nf.columns.size(); ++k)
            names.push_back(nf.columns[k] + "(" + transform_name(transforms[k]) + ")");
    } else if (!transforms.empty()) {
        throw std::runtime_error("transforms given but no node covariate file");
    }

    CovariateBundle covs(std::move(edge_mats), std::move(node_mat), std::move(transforms));
    covs.check_compatible(n);

    return LoadedInputs{std::move(a),        std::move(b_tilde), std::move(covs),
                        std::move(seeds),    std::move(labels_a), std::move(labels_b),
                        std::move(names),    std::move(warnings)};
}

// ---------------------------------------------------------------------------
// Atomic output. A failed run may leave nothing behind but never a
// truncated artifact.
// ---------------------------------------------------------------------------

inline void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    static std::atomic<unsigned> counter{0};
    const fs::path target(path);
    fs::path dir = target.parent_path();
    if (dir.empty()) dir = ".";
    const fs::path tmp = dir / (".tmp." + target.filename().string() + "." +
                                std::to_string(::getpid()) + "." + std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot create temporary file in " + dir.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ec2;
        fs::remove(tmp, ec2);
        throw std::runtime_error("failed renaming " + tmp.string() + " to " + path + ": " +
                                 ec.message());
    }
}

// The one environment override: relative output paths land in
// COVMATCH_OUTPUT_DIR when it is set.
inline std::string resolve_output_path(const std::string& path) {
    namespace fs = std::filesystem;
    const char* dir = std::getenv("COVMATCH_OUTPUT_DIR");
    if (dir == nullptr || *dir == '\0' || fs::path(path).is_absolute()) return path;
    return (fs::path(dir) / path).string();
}

// ---------------------------------------------------------------------------
// Simulation grids: a sweep over (alpha, gamma) cells.
// ---------------------------------------------------------------------------

struct GridConfig {
    SimConfig base;  // per-cell runs override alpha, gamma, and the stream seed
    std::vector<double> alphas;
    std::vector<double> gammas;
    std::vector<MethodKind> methods;

    void validate() const {
        if (alphas.empty() || gammas.empty())
            throw std::invalid_argument("invalid grid values: need at least one alpha and gamma");
        for (double a : alphas)
            if (!(a >= 0.0))
                throw std::invalid_argument("invalid grid values: alpha must be >= 0");
        for (double g : gammas)
            if (!(g >= 0.0 && g <= 1.0))
                throw std::invalid_argument("invalid grid values: gamma must lie in [0, 1]");
        if (methods.empty()) throw std::invalid_argument("invalid grid values: no methods");
    }
};

struct GridCell {
    double alpha = 0.0;
    double gamma = 0.0;
    ExperimentSummary summary;
};

struct GridRun {
    GridConfig config;
    std::vector<GridCell> cells;
};

// Every cell gets its own derived base stream, so adding a grid point
// never perturbs the draws of the others.
inline GridRun run_grid(const GridConfig& cfg) {
    cfg.validate();
    GridRun out;
    out.config = cfg;
    std::uint64_t cell_index = 0;
    for (double alpha : cfg.alphas) {
        for (double gamma : cfg.gammas) {
            SimConfig cell = cfg.base;
            cell.alpha = alpha;
            cell.gamma = gamma;
            cell.base_rng_seed = cfg.base.base_rng_seed ^ mix64(1000003 + cell_index);
            GridCell gc;
            gc.alpha = alpha;
            gc.gamma = gamma;
            gc.summary = run_experiment(cell, cfg.methods);
            out.cells.push_back(std::move(gc));
            ++cell_index;
        }
    }
    return out;
}

// Tidy CSV, one row per method x rep x cell. Wall times are deliberately
// absent: the CSV must be byte-identical across runs of the same seed,
// and timings live in the JSON summary instead.
inline std::string grid_csv_text(const GridRun& run) {
    std::string out = "alpha,gamma,method,rep,matching_error,objective\n";
    for (const auto& cell : run.cells) {
        for (const auto& rec : cell.summary.records) {
            out += format_double(cell.alpha) + "," + format_double(cell.gamma) + "," +
                   method_name(rec.method) + "," + std::to_string(rec.rep) + "," +
                   format_double(rec.matching_error) + "," + format_double(rec.objective) + "\n";
        }
    }
    return out;
}

}  // namespace covmatch

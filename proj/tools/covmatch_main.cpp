#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "covmatch/io.hpp"
#include "covmatch/matchers.hpp"
#include "covmatch/qap.hpp"
#include "covmatch/simulate.hpp"
#include "covmatch/version.hpp"

namespace {

using nlohmann::json;

json tool_block() {
    return json{{"name", covmatch::kToolName}, {"version", covmatch::kToolVersion}};
}

void emit_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << json{{"warning", w}}.dump() << "\n";
}

covmatch::LinkKind parse_link_or_throw(const std::string& s) {
    if (s == "identity") return covmatch::LinkKind::Identity;
    if (s == "logit") return covmatch::LinkKind::Logit;
    throw std::runtime_error("unknown link '" + s + "' (expected identity or logit)");
}

covmatch::SignKind parse_sign_or_throw(const std::string& s) {
    if (s == "easy") return covmatch::SignKind::Easy;
    if (s == "difficult") return covmatch::SignKind::Difficult;
    throw std::runtime_error("unknown sign '" + s + "' (expected easy or difficult)");
}

covmatch::TransformKind parse_transform_or_throw(const std::string& s) {
    if (s == "abs-diff") return covmatch::TransformKind::AbsDiff;
    if (s == "equal") return covmatch::TransformKind::EqualityIndicator;
    throw std::runtime_error("unknown transform '" + s + "' (expected abs-diff or equal)");
}

covmatch::MethodKind parse_method_or_throw(const std::string& s) {
    const auto m = covmatch::parse_method(s);
    if (!m) throw std::runtime_error("unknown method '" + s + "'");
    return *m;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(s);
    while (std::getline(in, tok, ',')) out.push_back(tok);
    return out;
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

struct MatchArgs {
    covmatch::InputSpec spec;
    std::string link = "logit";
    std::string method;
    std::string transforms;
};

json fit_block(const covmatch::GlmFit& fit, const std::vector<std::string>& covariate_names) {
    std::vector<std::string> names = {"intercept", "adjacency"};
    names.insert(names.end(), covariate_names.begin(), covariate_names.end());
    json coefs = json::array();
    for (Eigen::Index k = 0; k < fit.theta.size(); ++k) {
        json c{{"name", names[static_cast<std::size_t>(k)]}, {"estimate", fit.theta(k)}};
        if (fit.std_errors)
            c["std_error"] = (*fit.std_errors)(k);
        else
            c["std_error"] = nullptr;
        coefs.push_back(std::move(c));
    }
    json out{{"link", covmatch::link_name(fit.link)},
             {"coefficients", std::move(coefs)},
             {"converged", fit.converged},
             {"iterations", fit.iterations},
             {"final_loss", fit.loss_trace.back()},
             {"separation_warning", fit.separation_warning},
             {"ridge_used", fit.ridge_used}};
    if (fit.column_scales) {
        out["standardized"] = true;
        std::vector<double> scales(fit.column_scales->data(),
                                   fit.column_scales->data() + fit.column_scales->size());
        out["column_scales"] = scales;
    } else {
        out["standardized"] = false;
    }
    return out;
}

int run_match(const MatchArgs& args) {
    covmatch::InputSpec spec = args.spec;
    spec.link = parse_link_or_throw(args.link);
    spec.method = parse_method_or_throw(args.method);
    if (!args.transforms.empty())
        for (const auto& t : split_commas(args.transforms))
            spec.transforms.push_back(parse_transform_or_throw(t));

    const covmatch::LoadedInputs in = covmatch::load_inputs(spec);
    emit_warnings(in.warnings);

    const covmatch::MatchResult res = covmatch::run_method(
        spec.method, in.a, in.b_tilde, in.covs, in.seeds, spec.link, spec.faq, spec.glm);

    json matching = json::array();
    for (int i = 0; i < res.permutation.n(); ++i)
        matching.push_back(json{{"a", in.labels_a[static_cast<std::size_t>(res.permutation[i])]},
                                {"b", in.labels_b[static_cast<std::size_t>(i)]}});

    const bool qap_backed = spec.method == covmatch::MethodKind::CovQap ||
                            spec.method == covmatch::MethodKind::NoCovQap ||
                            spec.method == covmatch::MethodKind::AvgSim;
    json config{{"graph_a", spec.graph_a_path},
                {"graph_b", spec.graph_b_path},
                {"seeds", spec.seeds_path},
                {"edge_covariates", spec.edge_cov_paths},
                {"node_covariates", spec.node_cov_path ? json(*spec.node_cov_path) : json(nullptr)},
                {"link", covmatch::link_name(spec.link)},
                {"method", covmatch::method_name(spec.method)},
                {"faq", {{"max_iter", spec.faq.max_iter},
                         {"rel_tol", spec.faq.rel_tol},
                         {"init", "barycenter"},
                         {"rng_seed", spec.faq.rng_seed}}},
                {"glm", {{"grad_tol", spec.glm.grad_tol},
                         {"max_iter", spec.glm.max_iter},
                         {"standardize", spec.glm.standardize}}}};

    json doc{{"schema_version", covmatch::kSchemaVersion},
             {"tool", tool_block()},
             {"command", "match"},
             {"config", std::move(config)},
             {"rng_seed", spec.faq.rng_seed},
             {"n", in.a.n()},
             {"n_seeds", in.seeds.size()},
             {"method", res.method},
             {"objective", res.objective},
             {"objective_kind", qap_backed ? "frobenius-squared" : "seed-similarity"},
             {"wall_time_sec", res.wall_time_sec},
             {"matching", std::move(matching)},
             {"permutation", res.permutation.map()},
             {"warnings", in.warnings}};
    if (res.fit) doc["fit"] = fit_block(*res.fit, in.covariate_names);
    if (res.prob_clamp_count) doc["prob_clamp_count"] = *res.prob_clamp_count;

    covmatch::atomic_write_file(covmatch::resolve_output_path(spec.output_path),
                                doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string out_csv;   // overrides config
    std::string out_json;  // overrides config
};

int run_simulate(const SimulateArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + args.config_path);
    json cfg;
    try {
        cfg = json::parse(in, nullptr, true, true);  // comments allowed
    } catch (const json::exception& e) {
        throw std::runtime_error("config parse error in " + args.config_path + ": " + e.what());
    }

    static const std::set<std::string> known{
        "n",      "p",       "q",       "theta0",  "sign",    "alphas",       "gammas",
        "n_seeds", "n_reps", "link",    "methods", "base_rng_seed", "faq",   "glm",
        "out_csv", "out_json"};
    for (const auto& [key, value] : cfg.items()) {
        (void)value;
        if (!known.count(key)) throw std::runtime_error("unknown config key '" + key + "'");
    }

    covmatch::GridConfig grid;
    grid.base.n = cfg.value("n", grid.base.n);
    grid.base.p = cfg.value("p", grid.base.p);
    grid.base.q = cfg.value("q", grid.base.q);
    grid.base.theta0 = cfg.value("theta0", grid.base.theta0);
    grid.base.sign = parse_sign_or_throw(cfg.value("sign", "easy"));
    grid.base.n_seeds = cfg.value("n_seeds", grid.base.n_seeds);
    grid.base.n_reps = cfg.value("n_reps", grid.base.n_reps);
    grid.base.link = parse_link_or_throw(cfg.value("link", "identity"));
    grid.base.base_rng_seed = cfg.value("base_rng_seed", std::uint64_t{1});
    if (cfg.contains("faq")) {
        const auto& f = cfg.at("faq");
        grid.base.faq.max_iter = f.value("max_iter", grid.base.faq.max_iter);
        grid.base.faq.rel_tol = f.value("rel_tol", grid.base.faq.rel_tol);
        grid.base.faq.rng_seed = f.value("rng_seed", grid.base.faq.rng_seed);
    }
    if (cfg.contains("glm")) {
        const auto& g = cfg.at("glm");
        grid.base.glm.grad_tol = g.value("grad_tol", grid.base.glm.grad_tol);
        grid.base.glm.max_iter = g.value("max_iter", grid.base.glm.max_iter);
        grid.base.glm.standardize = g.value("standardize", grid.base.glm.standardize);
    }
    if (!cfg.contains("alphas") || !cfg.contains("gammas"))
        throw std::runtime_error("config needs 'alphas' and 'gammas' arrays");
    grid.alphas = cfg.at("alphas").get<std::vector<double>>();
    grid.gammas = cfg.at("gammas").get<std::vector<double>>();
    if (!cfg.contains("methods")) throw std::runtime_error("config needs a 'methods' array");
    for (const auto& m : cfg.at("methods"))
        grid.methods.push_back(parse_method_or_throw(m.get<std::string>()));

    const std::string out_csv =
        !args.out_csv.empty() ? args.out_csv : cfg.value("out_csv", std::string{});
    const std::string out_json =
        !args.out_json.empty() ? args.out_json : cfg.value("out_json", std::string{});
    if (out_csv.empty() || out_json.empty())
        throw std::runtime_error("output paths missing: set out_csv/out_json or pass flags");

    // Set per-cell alpha/gamma placeholders so base validation passes.
    grid.base.alpha = grid.alphas.front();
    grid.base.gamma = grid.gammas.front();
    grid.validate();
    grid.base.validate();

    const covmatch::GridRun run = covmatch::run_grid(grid);

    json cells = json::array();
    for (const auto& cell : run.cells) {
        json methods = json::array();
        for (const auto& ms : cell.summary.methods) {
            methods.push_back(json{{"method", covmatch::method_name(ms.method)},
                                   {"reps", ms.reps},
                                   {"mean_error", ms.mean_error},
                                   {"sd_error", ms.sd_error},
                                   {"mean_wall_time_sec", ms.mean_wall_time_sec}});
        }
        double mean_clamps = 0.0;
        int count = 0;
        for (const auto& rec : cell.summary.records) {
            if (rec.method != cell.summary.methods.front().method) continue;
            mean_clamps += static_cast<double>(rec.p_clamp_count);
            ++count;
        }
        if (count > 0) mean_clamps /= count;
        cells.push_back(json{{"alpha", cell.alpha},
                             {"gamma", cell.gamma},
                             {"cell_rng_seed", cell.summary.config.base_rng_seed},
                             {"mean_p_clamp_count", mean_clamps},
                             {"methods", std::move(methods)}});
    }

    std::vector<std::string> method_names;
    for (auto mk : grid.methods) method_names.emplace_back(covmatch::method_name(mk));
    json doc{{"schema_version", covmatch::kSchemaVersion},
             {"tool", tool_block()},
             {"command", "simulate"},
             {"config",
              {{"n", grid.base.n},
               {"p", grid.base.p},
               {"q", grid.base.q},
               {"theta0", grid.base.theta0},
               {"sign", covmatch::sign_name(grid.base.sign)},
               {"alphas", grid.alphas},
               {"gammas", grid.gammas},
               {"n_seeds", grid.base.n_seeds},
               {"n_reps", grid.base.n_reps},
               {"link", covmatch::link_name(grid.base.link)},
               {"methods", method_names},
               {"faq", {{"max_iter", grid.base.faq.max_iter}, {"rel_tol", grid.base.faq.rel_tol}}},
               {"glm",
                {{"grad_tol", grid.base.glm.grad_tol},
                 {"max_iter", grid.base.glm.max_iter},
                 {"standardize", grid.base.glm.standardize}}}}},
             {"base_rng_seed", grid.base.base_rng_seed},
             {"cells", std::move(cells)}};

    covmatch::atomic_write_file(covmatch::resolve_output_path(out_csv),
                                covmatch::grid_csv_text(run));
    covmatch::atomic_write_file(covmatch::resolve_output_path(out_json), doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleLapArgs {
    std::string matrix_path;
    std::string sense = "min";
    std::string output_path;
};

struct OracleQapArgs {
    std::string p_path;
    std::string b_path;
    std::string seed_ids;
    std::string output_path;
};

void emit_oracle(const json& doc, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        covmatch::atomic_write_file(covmatch::resolve_output_path(output_path),
                                    doc.dump(2) + "\n");
    }
}

int run_oracle_lap(const OracleLapArgs& args) {
    covmatch::Sense sense;
    if (args.sense == "min")
        sense = covmatch::Sense::Min;
    else if (args.sense == "max")
        sense = covmatch::Sense::Max;
    else
        throw std::runtime_error("unknown sense '" + args.sense + "' (expected min or max)");
    const Eigen::MatrixXd m = covmatch::read_dense_matrix(args.matrix_path);
    const covmatch::LapResult res = covmatch::brute_force_lap(covmatch::CostMatrix{m, sense});
    emit_oracle(json{{"schema_version", covmatch::kSchemaVersion},
                     {"tool", tool_block()},
                     {"command", "oracle-lap"},
                     {"sense", args.sense},
                     {"assignment", res.assignment.map()},
                     {"objective", res.objective}},
                args.output_path);
    return 0;
}

int run_oracle_qap(const OracleQapArgs& args) {
    const Eigen::MatrixXd p = covmatch::read_dense_matrix(args.p_path);
    const covmatch::Graph b(covmatch::read_dense_matrix(args.b_path));
    std::vector<int> ids;
    if (!args.seed_ids.empty())
        for (const auto& tok : split_commas(args.seed_ids)) ids.push_back(std::stoi(tok));
    const covmatch::SeedSet seeds(std::move(ids));
    const covmatch::QapBruteResult res = covmatch::brute_force_qap(p, b, seeds);
    emit_oracle(json{{"schema_version", covmatch::kSchemaVersion},
                     {"tool", tool_block()},
                     {"command", "oracle-qap"},
                     {"seeds", seeds.ids()},
                     {"permutation", res.permutation.map()},
                     {"objective", res.objective}},
                args.output_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covariate-assisted seeded graph matching"};
    app.set_version_flag("--version", covmatch::kToolVersion);
    app.require_subcommand(1);

    MatchArgs match_args;
    CLI::App* match = app.add_subcommand("match", "match two graphs");
    match->add_option("-a,--graph-a", match_args.spec.graph_a_path, "edge list of graph A")
        ->required();
    match->add_option("-b,--graph-b", match_args.spec.graph_b_path, "edge list of graph B")
        ->required();
    match->add_option("-s,--seeds", match_args.spec.seeds_path, "seed pair CSV")->required();
    match->add_option("-m,--method", match_args.method,
                      "cov-qap | cov-neigh | no-cov-qap | no-cov-neigh | avg-sim")
        ->required();
    match->add_option("-o,--output", match_args.spec.output_path, "output JSON path")->required();
    match->add_option("--edge-cov", match_args.spec.edge_cov_paths,
                      "edge covariate triplet file (repeatable)");
    std::string node_cov_path;
    match->add_option("--node-cov", node_cov_path, "node covariate CSV");
    match->add_option("--transforms", match_args.transforms,
                      "comma list, one per node covariate column: abs-diff | equal");
    match->add_option("--link", match_args.link, "identity | logit (default logit)");
    match->add_option("--faq-max-iter", match_args.spec.faq.max_iter, "Frank-Wolfe iteration cap");
    match->add_option("--faq-rel-tol", match_args.spec.faq.rel_tol,
                      "Frank-Wolfe relative tolerance");
    match->add_option("--faq-seed", match_args.spec.faq.rng_seed,
                      "seed echoed in outputs (reserved for randomized restarts)");
    match->add_option("--glm-grad-tol", match_args.spec.glm.grad_tol, "fit gradient tolerance");
    match->add_option("--glm-max-iter", match_args.spec.glm.max_iter, "fit iteration cap");
    match->add_flag("--standardize", match_args.spec.glm.standardize,
                    "standardize design columns over the seed block");

    SimulateArgs sim_args;
    CLI::App* simulate = app.add_subcommand("simulate", "run a synthetic experiment grid");
    simulate->add_option("-c,--config", sim_args.config_path, "JSON config")->required();
    simulate->add_option("--out-csv", sim_args.out_csv, "tidy CSV path (overrides config)");
    simulate->add_option("--out-json", sim_args.out_json, "JSON summary path (overrides config)");

    CLI::App* oracle = app.add_subcommand("oracle", "exhaustive references for small instances");
    oracle->require_subcommand(1);
    OracleLapArgs lap_args;
    CLI::App* olap = oracle->add_subcommand("lap", "brute-force assignment, m <= 9");
    olap->add_option("--matrix", lap_args.matrix_path, "dense cost matrix file")->required();
    olap->add_option("--sense", lap_args.sense, "min | max");
    olap->add_option("-o,--output", lap_args.output_path, "output JSON (default stdout)");
    OracleQapArgs qap_args;
    CLI::App* oqap = oracle->add_subcommand("qap", "brute-force seeded matching, n - s <= 8");
    oqap->add_option("--p", qap_args.p_path, "dense similarity matrix file")->required();
    oqap->add_option("--b", qap_args.b_path, "dense 0/1 adjacency matrix file")->required();
    oqap->add_option("--seed-ids", qap_args.seed_ids, "comma-separated seed ids");
    oqap->add_option("-o,--output", qap_args.output_path, "output JSON (default stdout)");

    int rc = 0;
    match->callback([&]() {
        if (!node_cov_path.empty()) match_args.spec.node_cov_path = node_cov_path;
        rc = run_match(match_args);
    });
    simulate->callback([&]() { rc = run_simulate(sim_args); });
    olap->callback([&]() { rc = run_oracle_lap(lap_args); });
    oqap->callback([&]() { rc = run_oracle_qap(qap_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0)
            std::cerr << json{{"error", std::string("argument error: ") + e.what()},
                              {"tool", tool_block()}}
                             .dump()
                      << "\n";
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"tool", tool_block()}}.dump() << "\n";
        return 1;
    }
    return rc;
}

// gtv: command-line front end for the graph total variation regression library.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gtv/gtv.hpp"
#include "gtv/io.hpp"

namespace {

using namespace gtv;

std::vector<Method> parse_methods(const std::string& list) {
    std::vector<Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(method_from_string(item));
    if (out.empty()) throw invalid_input("no methods given");
    return out;
}

std::vector<double> parse_list(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

void emit_json(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw invalid_input("cannot open '" + path + "' for writing");
    f << j.dump(2) << '\n';
}

struct ScenarioFlags {
    std::string config;
    std::string family = "block";
    Index p = 40, K = 10, n = 60, s = 12;
    double r = 0.8, sigma_noise = 0.01, beta_sd = 0.01;
    double within_block_sd = -1.0;
    Index split_blocks = 0;
    std::uint64_t seed = 0;
    bool fix_support = false;

    void add(CLI::App* app) {
        app->add_option("--config", config, "scenario JSON file; flags given explicitly override it");
        app->add_option("--family", family, "block, chain or lattice");
        app->add_option("--p", p, "number of features");
        app->add_option("--K", K, "number of blocks (block family)");
        app->add_option("--r", r, "correlation coefficient");
        app->add_option("--n", n, "number of samples");
        app->add_option("--s", s, "number of active coefficients");
        app->add_option("--sigma-noise", sigma_noise, "noise standard deviation");
        app->add_option("--beta-sd", beta_sd, "sd of active coefficients around 1");
        app->add_option("--within-block-sd", within_block_sd, "misalignment: sd of active coefficients");
        app->add_option("--split-blocks", split_blocks, "misalignment: number of separated active runs (chain)");
        app->add_option("--seed", seed, "master seed");
        app->add_flag("--fix-support", fix_support, "keep the active blocks fixed across trials");
    }

    Scenario build(const CLI::App* app) const {
        Scenario sc;
        if (!config.empty()) {
            std::ifstream f(config);
            if (!f) throw invalid_input("cannot open '" + config + "'");
            sc = io::scenario_from_json(nlohmann::json::parse(f));
        }
        auto given = [&](const char* name) { return config.empty() || app->count(name) > 0; };
        if (given("--family")) sc.family = family_from_string(family);
        if (given("--p")) sc.p = p;
        if (given("--K")) sc.K = K;
        if (given("--r")) sc.r = r;
        if (given("--n")) sc.n = n;
        if (given("--s")) sc.s = s;
        if (given("--sigma-noise")) sc.sigma_noise = sigma_noise;
        if (given("--beta-sd")) sc.beta_noise_sd = beta_sd;
        if (given("--seed")) sc.seed = seed;
        if (fix_support) sc.fix_support = true;
        if (within_block_sd >= 0.0) {
            sc.misalignment = Misalignment::within_block_sd;
            sc.within_block_sd = within_block_sd;
        }
        if (split_blocks > 0) {
            sc.misalignment = Misalignment::split_blocks;
            sc.split_count = split_blocks;
        }
        sc.validate();
        return sc;
    }
};

void print_theory_table(const TheoryReport& r) {
    auto row = [](const char* q, double exact, double bound) {
        std::cout << std::left << std::setw(22) << q << std::right << std::setw(16) << exact << std::setw(16) << bound;
        if (exact != 0.0 && std::isfinite(exact) && std::isfinite(bound)) std::cout << std::setw(14) << bound / exact;
        std::cout << '\n';
    };
    std::cout << std::setprecision(6);
    std::cout << "family: " << to_string(r.graph_family) << "  (bounds hold up to absolute constants; C = 1)\n";
    std::cout << std::left << std::setw(22) << "quantity" << std::right << std::setw(16) << "exact" << std::setw(16)
              << "bound" << std::setw(14) << "slack" << '\n';
    row("rho", r.rho_exact, r.rho_bound);
    row("lambda_min", r.min_eig_exact, r.min_eig_lower);
    std::cout << std::left << std::setw(22) << "1/k_T bound" << std::right << std::setw(32) << r.kT_inv_bound << '\n';
    std::cout << std::left << std::setw(22) << "lambda_1 floor" << std::right << std::setw(32) << r.lambda1_floor << '\n';
    std::cout << std::left << std::setw(22) << "lambda_1 used" << std::right << std::setw(32) << r.lambda_1 << '\n';
    std::cout << std::left << std::setw(22) << "MSE bound" << std::right << std::setw(32) << r.mse_bound << '\n';
    std::cout << std::left << std::setw(22) << "prediction bound" << std::right << std::setw(32) << r.prediction_bound
              << '\n';
    std::cout << std::left << std::setw(22) << "consistency proviso" << std::right << std::setw(32)
              << r.consistency_proviso << '\n';
    if (r.lambda1_below_floor) std::cerr << "warning: lambda_1 is below the floor; the bound is not guaranteed\n";
    if (!r.alignment_condition) std::cerr << "warning: lambda_1 lambda_tv ||Gamma beta*||_1 exceeds 1\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph total variation regression: fitting, simulation and bound evaluation"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a method comparison on a synthetic scenario");
    ScenarioFlags sim_sc;
    sim_sc.add(sim);
    int trials = 30;
    std::string methods = "gtv-esti,gtv-indep,lasso,elasticnet,owl";
    std::string out_csv, summary_json, plot_csv, lambda1_list, tv_list, ls_list;
    unsigned threads = 1;
    int folds = 5;
    int boot = 500;
    double tol = 1e-6;
    sim->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
    sim->add_option("--methods", methods, "comma list of gtv-esti, gtv-indep, lasso, elasticnet, owl");
    sim->add_option("--out", out_csv, "per-trial results CSV");
    sim->add_option("--summary", summary_json, "summary JSON (default: stdout)");
    sim->add_option("--plot", plot_csv, "plot-ready long CSV, appended if it exists");
    sim->add_option("--lambda1", lambda1_list, "comma list overriding the lambda_1 grid");
    sim->add_option("--lambda-tv", tv_list, "comma list overriding the lambda_tv grid");
    sim->add_option("--lambda-s", ls_list, "comma list overriding the lambda_s grid");
    sim->add_option("--threads", threads, "worker threads (0 = all cores)");
    sim->add_option("--folds", folds, "cross-validation folds");
    sim->add_option("--bootstrap", boot, "bootstrap resamples for the median sd");
    sim->add_option("--tol", tol, "solver tolerance");

    // generate
    auto* gen = app.add_subcommand("generate", "write one synthetic data set as CSV files");
    ScenarioFlags gen_sc;
    gen_sc.add(gen);
    std::string gen_dir = ".";
    Index side_rows = 0;
    gen->add_option("--dir", gen_dir, "output directory (must exist)");
    gen->add_option("--side-rows", side_rows, "also write this many side-information rows");

    // fit
    auto* fit = app.add_subcommand("fit", "fit GTV on CSV data");
    std::string fx, fy, fsigma, fout, fcv_table;
    double l1 = 0.0, ltv = 0.0, ls = 0.0;
    bool fcv = false, fcenter_y = false;
    int fmax_iters = 10000;
    fit->add_option("--x", fx, "design matrix CSV")->required();
    fit->add_option("--y", fy, "response CSV")->required();
    fit->add_option("--sigma", fsigma, "covariance (.json envelope or CSV); default: sample covariance of X");
    fit->add_option("--lambda1", l1, "sparsity penalty");
    fit->add_option("--lambda-tv", ltv, "graph total variation weight");
    fit->add_option("--lambda-s", ls, "Laplacian smoothing penalty");
    fit->add_flag("--cv", fcv, "choose penalties by 5-fold CV over the default grids");
    fit->add_flag("--center-y", fcenter_y, "subtract the response mean (reported as the intercept)");
    fit->add_option("--cv-table", fcv_table, "write the CV table CSV here");
    fit->add_option("--max-iters", fmax_iters, "ADMM iteration cap");
    fit->add_option("--tol", tol, "ADMM tolerance");
    fit->add_option("--out", fout, "result JSON (default: stdout)");

    // theory
    auto* th = app.add_subcommand("theory", "evaluate the finite-sample bounds on a family instance");
    ScenarioFlags th_sc;
    th_sc.add(th);
    double th_ltv = 1.0, th_ls = 0.0, th_l1 = -1.0;
    std::string th_json, th_sigma, th_beta;
    th->add_option("--lambda-tv", th_ltv, "lambda_tv");
    th->add_option("--lambda-s", th_ls, "lambda_s in [0, 1]");
    th->add_option("--lambda1", th_l1, "lambda_1 (default: the floor)");
    th->add_option("--sigma", th_sigma, "generic instance: covariance file instead of a family");
    th->add_option("--beta", th_beta, "generic instance: beta* CSV");
    th->add_option("--json", th_json, "also write the report as JSON");

    // cov-estimate
    auto* ce = app.add_subcommand("cov-estimate", "estimate a covariance matrix");
    std::string ce_x, ce_method = "threshold", ce_feat, ce_out;
    int ce_folds = 2, ce_repeats = 10;
    std::uint64_t ce_seed = 0;
    bool ce_center = false;
    double ce_t = -1.0;
    ce->add_option("--x", ce_x, "design matrix CSV")->required();
    ce->add_option("--method", ce_method, "sample, threshold or sideinfo");
    ce->add_option("--features", ce_feat, "feature matrix CSV (sideinfo)");
    ce->add_option("--threshold", ce_t, "fixed threshold instead of CV");
    ce->add_option("--folds", ce_folds, "threshold CV folds");
    ce->add_option("--repeats", ce_repeats, "threshold CV repeats");
    ce->add_option("--seed", ce_seed, "threshold CV seed");
    ce->add_flag("--center", ce_center, "center columns before the sample covariance");
    ce->add_option("--out", ce_out, "JSON envelope (default: stdout)");

    // graph
    auto* gr = app.add_subcommand("graph", "covariance graph, incidence matrix and spectral constants");
    std::string gr_sigma, gr_edges, gr_gamma;
    double gr_ltv = 0.0, gr_eps = 0.0;
    gr->add_option("--sigma", gr_sigma, "covariance (.json envelope or CSV)")->required();
    gr->add_option("--lambda-tv", gr_ltv, "lambda_tv");
    gr->add_option("--eps", gr_eps, "drop edges with |Sigma_jk| <= eps");
    gr->add_option("--edges", gr_edges, "edge list CSV");
    gr->add_option("--gamma", gr_gamma, "incidence matrix triplet CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const Scenario sc = sim_sc.build(sim);
            Grids g = Grids::defaults();
            if (!lambda1_list.empty()) g.lambda1 = parse_list(lambda1_list);
            if (!tv_list.empty()) g.lambda_tv = parse_list(tv_list);
            if (!ls_list.empty()) g.lambda_s = parse_list(ls_list);
            HarnessOptions ho;
            ho.threads = threads;
            ho.folds = folds;
            ho.solver.tol_primal = ho.solver.tol_dual = tol;
            const auto res = run_experiment(sc, parse_methods(methods), trials, g, ho, boot);
            if (!out_csv.empty()) {
                std::ofstream f(out_csv);
                if (!f) throw invalid_input("cannot open '" + out_csv + "' for writing");
                io::write_results_csv(f, res);
            }
            if (!plot_csv.empty()) {
                const bool exists = std::ifstream(plot_csv).good();
                std::ofstream f(plot_csv, std::ios::app);
                if (!f) throw invalid_input("cannot open '" + plot_csv + "' for writing");
                io::write_plot_csv(f, {res}, false, !exists);
            }
            emit_json(io::summary_json(res), summary_json);
            for (const auto& r : res.records)
                if (!r.error.empty())
                    std::cerr << "trial " << r.trial << ' ' << to_string(r.method) << ": " << r.error << '\n';
        } else if (*gen) {
            const Scenario sc = gen_sc.build(gen);
            const Matrix sigma = make_covariance(sc).matrix;
            const auto beta = make_beta(sc).beta;
            const auto data = sample_data(sigma, beta, sc.n, sc.sigma_noise, child_seed(sc.seed, 1));
            io::write_matrix_csv(gen_dir + "/X.csv", data.x);
            io::write_matrix_csv(gen_dir + "/y.csv", data.y);
            io::write_matrix_csv(gen_dir + "/beta.csv", beta);
            emit_json(io::to_json(make_covariance(sc)), gen_dir + "/sigma.json");
            if (side_rows > 0)
                io::write_matrix_csv(gen_dir + "/X_ind.csv", sample_sideinfo(sigma, side_rows, child_seed(sc.seed, 2)));
        } else if (*fit) {
            const Matrix x = io::read_matrix_csv(fx);
            Vector y = io::read_vector_csv(fy);
            const double intercept = fcenter_y && y.size() > 0 ? y.mean() : 0.0;
            y.array() -= intercept;
            const CovarianceEstimate cov = fsigma.empty() ? sample_covariance(x) : io::read_covariance(fsigma);
            const auto graph = build_graph(cov);
            GtvConfig cfg;
            cfg.lambda_1 = l1;
            cfg.lambda_tv = ltv;
            cfg.lambda_s = ls;
            cfg.max_iters = fmax_iters;
            cfg.tol_primal = cfg.tol_dual = tol;
            if (fcv) {
                const Grids g = Grids::defaults();
                CvOptions cvo;
                cvo.solver = cfg;
                const auto cv = cross_validate(x, y, [&](const Matrix&) { return graph; },
                                               CvGrids{g.lambda1, g.tv_grid(x.cols(), components(graph).count()), g.lambda_s},
                                               cvo);
                cfg = cv.best;
                if (!fcv_table.empty()) {
                    std::ofstream f(fcv_table);
                    if (!f) throw invalid_input("cannot open '" + fcv_table + "' for writing");
                    io::write_cv_table_csv(f, cv.table);
                }
            }
            const auto r = fit_gtv(x, y, incidence(graph, cfg.lambda_tv), cfg);
            auto j = io::to_json(r);
            j["lambda1"] = cfg.lambda_1;
            j["lambda_tv"] = cfg.lambda_tv;
            j["lambda_s"] = cfg.lambda_s;
            if (fcenter_y) j["intercept"] = intercept;
            emit_json(j, fout);
            if (!r.converged) std::cerr << "warning: solver did not reach the KKT tolerance\n";
        } else if (*th) {
            TheoryReport rep;
            const std::optional<double> lam = th_l1 >= 0.0 ? std::optional(th_l1) : std::nullopt;
            if (!th_sigma.empty()) {
                if (th_beta.empty()) throw invalid_input("--sigma needs --beta");
                const Matrix sigma = io::read_covariance(th_sigma).matrix;
                rep = theory_report(sigma, sigma, io::read_vector_csv(th_beta), th_sc.n, th_sc.sigma_noise, th_ltv,
                                    th_ls, lam);
            } else {
                rep = mse_bound_family(th_sc.build(th), th_ltv, th_ls, lam);
            }
            print_theory_table(rep);
            if (!th_json.empty()) emit_json(io::to_json(rep), th_json);
        } else if (*ce) {
            const Matrix x = io::read_matrix_csv(ce_x);
            SampleCovarianceOptions so;
            so.center = ce_center;
            CovarianceEstimate est;
            if (ce_method == "sample") {
                est = sample_covariance(x, so);
            } else if (ce_method == "threshold") {
                const auto s = sample_covariance(x, so);
                double t = ce_t;
                if (t < 0.0) t = select_threshold_cv(x, default_threshold_grid(s.matrix), ce_folds, ce_repeats, ce_seed, so).threshold;
                est = hard_threshold(s, t);
            } else if (ce_method == "sideinfo") {
                if (ce_feat.empty()) throw invalid_input("sideinfo needs --features");
                est = sideinfo_covariance(io::read_matrix_csv(ce_feat), x);
            } else {
                throw invalid_input("unknown method '" + ce_method + "' (expected sample, threshold or sideinfo)");
            }
            emit_json(io::to_json(est), ce_out);
        } else if (*gr) {
            const auto cov = io::read_covariance(gr_sigma);
            const auto graph = build_graph(cov, gr_eps);
            const auto sys = incidence(graph, gr_ltv);
            const auto blocks = components(graph);
            if (!gr_edges.empty()) {
                std::ofstream f(gr_edges);
                io::write_edges_csv(f, graph);
            }
            if (!gr_gamma.empty()) {
                std::ofstream f(gr_gamma);
                io::write_gamma_csv(f, sys.gamma);
            }
            nlohmann::json j{{"p", graph.p}, {"m", graph.m()}, {"components", blocks.count()},
                             {"rho_bound", rho_bound(blocks, gr_ltv)}};
            if (graph.p <= kDenseSpectralLimit) j["rho_exact"] = rho_exact(sys);
            std::cout << j.dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

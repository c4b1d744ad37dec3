#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gtv/covariance.hpp"
#include "gtv/cv.hpp"
#include "gtv/graph.hpp"
#include "gtv/owl.hpp"
#include "gtv/random.hpp"
#include "gtv/solver.hpp"
#include "gtv/synth.hpp"

namespace gtv {

enum class Method { gtv_esti, gtv_indep, lasso, elastic_net, owl };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::gtv_esti: return "GTV-Esti";
        case Method::gtv_indep: return "GTV-Indep";
        case Method::lasso: return "LASSO";
        case Method::elastic_net: return "ElasticNet";
        case Method::owl: return "OWL";
    }
    return "unknown";
}

inline Method method_from_string(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "gtv-esti" || s == "gtv_esti") return Method::gtv_esti;
    if (s == "gtv-indep" || s == "gtv_indep") return Method::gtv_indep;
    if (s == "lasso") return Method::lasso;
    if (s == "elasticnet" || s == "elastic-net" || s == "enet") return Method::elastic_net;
    if (s == "owl" || s == "oscar") return Method::owl;
    throw invalid_input("unknown method '" + s + "'");
}

inline std::vector<Method> all_methods() {
    return {Method::gtv_esti, Method::gtv_indep, Method::lasso, Method::elastic_net, Method::owl};
}

/// Tuning grids. Penalties are on the (1/n) scale of the GTV objective for
/// every method; baselines convert to their own scale internally.
struct Grids {
    std::vector<double> lambda1;
    std::vector<double> lambda_tv;  // empty: {0, 1, sqrt(p/K), 10}
    std::vector<double> lambda_s{0.0, 0.1, 0.5, 1.0};
    std::vector<double> enet_lambda_s{0.0, 0.1, 0.5, 1.0};
    std::vector<double> owl_lambda2{0.0, 1e-3, 1e-2, 1e-1};

    static std::vector<double> log_spaced(double lo, double hi, int count) {
        detail::require(lo > 0.0 && hi >= lo && count >= 1, "log_spaced: need 0 < lo <= hi and count >= 1");
        std::vector<double> g;
        if (count == 1) return {lo};
        for (int i = 0; i < count; ++i)
            g.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
        return g;
    }

    static Grids defaults() {
        Grids g;
        g.lambda1 = log_spaced(1e-4, 10.0, 13);
        return g;
    }

    std::vector<double> tv_grid(Index p, Index blocks) const {
        if (!lambda_tv.empty()) return lambda_tv;
        return {0.0, 1.0, std::sqrt(static_cast<double>(p) / static_cast<double>(std::max<Index>(blocks, 1))), 10.0};
    }
};

struct HarnessOptions {
    int folds = 5;
    unsigned threads = 1;
    Index sideinfo_rows = 1000;
    int threshold_folds = 2;
    int threshold_repeats = 10;
    GtvConfig solver;  // tolerances for every fit
};

/// Selected penalties and the refit on all rows.
struct MethodFit {
    Method method = Method::lasso;
    Vector beta;
    double lambda1 = 0.0;
    double lambda_tv = 0.0;
    double lambda_s = 0.0;
    double lambda2 = 0.0;  // OWL only
    double threshold = 0.0;  // covariance threshold, GTV only
    bool converged = false;
};

/// Thresholded sample covariance with the threshold chosen by repeated 2-fold CV.
inline CovarianceEstimate thresholded_covariance(const Matrix& x, std::uint64_t seed, int folds = 2, int repeats = 10) {
    const auto s = sample_covariance(x);
    const auto grid = default_threshold_grid(s.matrix);
    const auto sel = select_threshold_cv(x, grid, folds, repeats, seed);
    return hard_threshold(s, sel.threshold);
}

/// Cross-validates one method on (x, y) and refits with the selected penalties.
/// `x_side` is required for GTV-Indep.
inline MethodFit select_and_fit(Method method, const Matrix& x, const Vector& y, const Grids& grids,
                                const HarnessOptions& opts, std::uint64_t seed, const Matrix* x_side = nullptr,
                                Index blocks_hint = 1) {
    CvOptions cvo;
    cvo.folds = opts.folds;
    cvo.seed = seed;
    cvo.threads = 1;
    cvo.solver = opts.solver;
    MethodFit out;
    out.method = method;

    switch (method) {
        case Method::gtv_esti:
        case Method::gtv_indep: {
            const Matrix* src = &x;
            if (method == Method::gtv_indep) {
                if (!x_side || x_side->rows() == 0) throw invalid_input("GTV-Indep needs side-information rows");
                src = x_side;
            }
            const auto est = thresholded_covariance(*src, child_seed(seed, 1), opts.threshold_folds, opts.threshold_repeats);
            const auto graph = build_graph(est);
            CvGrids g{grids.lambda1, grids.tv_grid(x.cols(), blocks_hint), grids.lambda_s};
            const auto cv = cross_validate(x, y, [&](const Matrix&) { return graph; }, g, cvo);
            const auto fit = fit_gtv(x, y, incidence(graph, cv.best.lambda_tv), cv.best);
            out.beta = fit.beta;
            out.converged = fit.converged;
            out.lambda1 = cv.best.lambda_1;
            out.lambda_tv = cv.best.lambda_tv;
            out.lambda_s = cv.best.lambda_s;
            out.threshold = est.threshold;
            break;
        }
        case Method::lasso: {
            CovarianceGraph empty;
            empty.p = x.cols();
            CvGrids g{grids.lambda1, {0.0}, {0.0}};
            const auto cv = cross_validate(x, y, [&](const Matrix&) { return empty; }, g, cvo);
            const auto fit = fit_lasso(x, y, cv.best.lambda_1, opts.solver);
            out.beta = fit.beta;
            out.converged = fit.converged;
            out.lambda1 = cv.best.lambda_1;
            break;
        }
        case Method::elastic_net: {
            const auto sel = cross_validate_elastic_net(x, y, grids.lambda1, grids.enet_lambda_s, cvo);
            const double n = static_cast<double>(x.rows());
            const auto fit = fit_elastic_net(x, y, n * sel.lambda1, n * sel.secondary, opts.solver);
            out.beta = fit.beta;
            out.converged = fit.converged;
            out.lambda1 = sel.lambda1;
            out.lambda_s = sel.secondary;
            break;
        }
        case Method::owl: {
            const auto sel = cross_validate_owl(x, y, grids.lambda1, grids.owl_lambda2, cvo);
            const double n = static_cast<double>(x.rows());
            const auto fit = fit_owl(x, y, n * sel.lambda1, n * sel.secondary, opts.solver);
            out.beta = fit.beta;
            out.converged = fit.converged;
            out.lambda1 = sel.lambda1;
            out.lambda2 = sel.secondary;
            break;
        }
    }
    return out;
}

/// One (trial, method) cell of an experiment.
struct TrialRecord {
    int trial = 0;
    Method method = Method::lasso;
    std::uint64_t seed = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    double lambda1 = 0.0;
    double lambda_tv = 0.0;
    double lambda_s = 0.0;
    double lambda2 = 0.0;
    double threshold = 0.0;
    bool converged = false;
    std::string error;  // non-empty when the fit threw
    double runtime_ms = 0.0;
};

struct MethodSummary {
    Method method = Method::lasso;
    double median_mse = std::numeric_limits<double>::quiet_NaN();
    double boot_sd = std::numeric_limits<double>::quiet_NaN();
    int failures = 0;
};

struct ExperimentResult {
    Scenario scenario;
    std::uint64_t master_seed = 0;
    int trials = 0;
    std::vector<Method> methods;
    std::vector<TrialRecord> records;  // trial-major, methods in the order given
    std::vector<MethodSummary> summary;

    const MethodSummary& of(Method m) const {
        for (const auto& s : summary)
            if (s.method == m) return s;
        throw invalid_input(std::string("method not part of the experiment: ") + to_string(m));
    }

    std::vector<double> mse_of(Method m) const {
        std::vector<double> v;
        for (const auto& r : records)
            if (r.method == m && std::isfinite(r.mse)) v.push_back(r.mse);
        return v;
    }
};

inline double median(std::vector<double> v) {
    detail::require(!v.empty(), "median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Standard deviation of the median over B bootstrap resamples.
inline double bootstrap_median_sd(const std::vector<double>& values, int B = 500, std::uint64_t seed = 0) {
    detail::require(!values.empty(), "bootstrap_median_sd: values must be non-empty");
    detail::require(B >= 2, "bootstrap_median_sd: B must be >= 2");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> meds(static_cast<std::size_t>(B)), draw(values.size());
    for (auto& m : meds) {
        for (auto& d : draw) d = values[pick(rng)];
        m = median(draw);
    }
    // Shifted sums keep a constant input at exactly 0.
    double s1 = 0.0, s2 = 0.0;
    for (double m : meds) {
        const double d = m - meds.front();
        s1 += d;
        s2 += d * d;
    }
    return std::sqrt(std::max(s2 - s1 * s1 / B, 0.0) / (B - 1));
}

/// Runs `trials` independent replications. Trial t draws everything from
/// child_seed(master, t), so any subset of trials reproduces on its own.
inline ExperimentResult run_experiment(const Scenario& scenario, const std::vector<Method>& methods, int trials,
                                       const Grids& grids, const HarnessOptions& opts = {}, int bootstrap_b = 500) {
    scenario.validate();
    detail::require(trials >= 1, "run_experiment: trials must be >= 1");
    detail::require(!methods.empty(), "run_experiment: no methods given");
    detail::require(!grids.lambda1.empty(), "run_experiment: empty lambda_1 grid");

    ExperimentResult res;
    res.scenario = scenario;
    res.master_seed = scenario.seed;
    res.trials = trials;
    res.methods = methods;
    res.records.resize(static_cast<std::size_t>(trials) * methods.size());

    const Matrix sigma = make_covariance(scenario).matrix;
    const bool need_side = std::find(methods.begin(), methods.end(), Method::gtv_indep) != methods.end();
    const std::uint64_t support_seed = child_seed(scenario.seed, 0xf1);

    parallel_for(
        static_cast<std::size_t>(trials),
        [&](std::size_t t) {
            const std::uint64_t ts = child_seed(scenario.seed, t);
            Scenario sc = scenario;
            sc.seed = ts;
            const auto beta = make_beta(sc, scenario.fix_support ? std::optional(support_seed) : std::nullopt).beta;
            const auto data = sample_data(sigma, beta, sc.n, sc.sigma_noise, child_seed(ts, 1));
            const Matrix side = need_side ? sample_sideinfo(sigma, opts.sideinfo_rows, child_seed(ts, 2)) : Matrix();
            for (std::size_t k = 0; k < methods.size(); ++k) {
                TrialRecord& rec = res.records[t * methods.size() + k];
                rec.trial = static_cast<int>(t);
                rec.method = methods[k];
                rec.seed = ts;
                const auto start = std::chrono::steady_clock::now();
                try {
                    const auto fit = select_and_fit(methods[k], data.x, data.y, grids, opts, child_seed(ts, 3), &side,
                                                    sc.blocks());
                    rec.mse = (fit.beta - beta).squaredNorm();
                    rec.lambda1 = fit.lambda1;
                    rec.lambda_tv = fit.lambda_tv;
                    rec.lambda_s = fit.lambda_s;
                    rec.lambda2 = fit.lambda2;
                    rec.threshold = fit.threshold;
                    rec.converged = fit.converged;
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
                rec.runtime_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            }
        },
        opts.threads);

    for (std::size_t k = 0; k < methods.size(); ++k) {
        MethodSummary s;
        s.method = methods[k];
        const auto v = res.mse_of(methods[k]);
        s.failures = trials - static_cast<int>(v.size());
        if (!v.empty()) {
            s.median_mse = median(v);
            s.boot_sd = bootstrap_median_sd(v, bootstrap_b, child_seed(scenario.seed, 0xb007 + k));
        }
        res.summary.push_back(s);
    }
    return res;
}

/// 1 - (|A| + |B| - 2|A n B|) / (|A| + |B| - |A n B|); two empty sets score 1.
inline double tanimoto(std::vector<Index> a, std::vector<Index> b) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    if (a.empty() && b.empty()) return 1.0;
    std::vector<Index> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()),
                 ni = static_cast<double>(both.size());
    return 1.0 - (na + nb - 2.0 * ni) / (na + nb - ni);
}

/// Pearson correlation; absent when either vector has zero variance.
inline std::optional<double> support_correlation(const Vector& a, const Vector& b) {
    detail::require(a.size() == b.size(), "support_correlation: length mismatch");
    if (a.size() < 2) return std::nullopt;
    const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
    const double va = ca.squaredNorm(), vb = cb.squaredNorm();
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return std::clamp(ca.dot(cb) / std::sqrt(va * vb), -1.0, 1.0);
}

struct StabilityPair {
    Method method = Method::lasso;
    int a = 0;
    int b = 0;
    std::optional<double> correlation;
    double tanimoto = 1.0;
};

struct StabilityResult {
    std::vector<Method> methods;
    int splits = 0;
    int folds_used = 0;
    std::vector<std::vector<Vector>> betas;  // [method][subsample]
    std::vector<StabilityPair> pairs;
    std::vector<std::string> warnings;
};

struct StabilityOptions {
    int splits = 10;
    std::optional<std::uint64_t> shuffle_seed;  // rows are split contiguously unless set
    std::uint64_t cv_seed = 0;                  // shared by every subsample
    HarnessOptions harness;
};

/// Fits every method on `splits` non-overlapping subsamples and scores all
/// subsample pairs by coefficient correlation and support Tanimoto similarity.
inline StabilityResult stability_study(const Matrix& x, const Vector& y, const std::vector<Method>& methods,
                                       const Grids& grids, const StabilityOptions& opts = {},
                                       const Matrix* x_side = nullptr) {
    detail::require(x.rows() == y.size(), "stability_study: X rows must match y length");
    detail::require(opts.splits >= 2, "stability_study: need at least two subsamples");
    detail::require(x.rows() >= opts.splits, "stability_study: n must be >= splits");
    detail::require(!methods.empty(), "stability_study: no methods given");

    std::vector<Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    if (opts.shuffle_seed) {
        Rng rng(*opts.shuffle_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    const Index size = x.rows() / opts.splits;

    StabilityResult res;
    res.methods = methods;
    res.splits = opts.splits;
    HarnessOptions ho = opts.harness;
    if (size < ho.folds) {
        if (size < 2) throw invalid_input("stability_study: subsamples have fewer than 2 rows");
        res.warnings.push_back("subsamples have " + std::to_string(size) + " rows; CV folds reduced from " +
                               std::to_string(ho.folds) + " to " + std::to_string(size));
        ho.folds = static_cast<int>(size);
    }
    if (size < ho.threshold_folds) ho.threshold_folds = 2;
    res.folds_used = ho.folds;
    res.betas.assign(methods.size(), std::vector<Vector>(static_cast<std::size_t>(opts.splits)));

    const std::size_t cells = methods.size() * static_cast<std::size_t>(opts.splits);
    parallel_for(
        cells,
        [&](std::size_t c) {
            const std::size_t m = c / static_cast<std::size_t>(opts.splits);
            const int sidx = static_cast<int>(c % static_cast<std::size_t>(opts.splits));
            std::vector<Index> rows(order.begin() + sidx * size, order.begin() + (sidx + 1) * size);
            const Matrix xs = select_rows(x, rows);
            const Vector ys = select_rows(y, rows);
            res.betas[m][static_cast<std::size_t>(sidx)] =
                select_and_fit(methods[m], xs, ys, grids, ho, opts.cv_seed, x_side).beta;
        },
        ho.threads);

    for (std::size_t m = 0; m < methods.size(); ++m)
        for (int a = 0; a < opts.splits; ++a)
            for (int b = a + 1; b < opts.splits; ++b) {
                const auto& ba = res.betas[m][static_cast<std::size_t>(a)];
                const auto& bb = res.betas[m][static_cast<std::size_t>(b)];
                res.pairs.push_back({methods[m], a, b, support_correlation(ba, bb),
                                     tanimoto(support_of(ba), support_of(bb))});
            }
    return res;
}

}  // namespace gtv

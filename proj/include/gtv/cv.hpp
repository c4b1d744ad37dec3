#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gtv/graph.hpp"
#include "gtv/owl.hpp"
#include "gtv/random.hpp"
#include "gtv/solver.hpp"

namespace gtv {

/// One row of the CV table: held-out mean squared prediction error of one
/// grid point on one fold.
struct CvRow {
    double lambda1 = 0.0;
    double lambda_tv = 0.0;
    double lambda_s = 0.0;
    int fold = 0;
    double mse = 0.0;
};

struct CvGrids {
    std::vector<double> lambda1;
    std::vector<double> lambda_tv{0.0};
    std::vector<double> lambda_s{0.0};
};

struct CvOptions {
    int folds = 5;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    GtvConfig solver;  // tolerances and ADMM controls; penalties are overwritten
};

struct CvResult {
    GtvConfig best;
    double best_mse = 0.0;
    std::vector<CvRow> table;
};

/// Fits a decreasing lambda_1 path for one "outer" grid cell on training data
/// and returns one coefficient vector per path entry.
using PathFitter = std::function<std::vector<Vector>(const Matrix& x_train, const Vector& y_train, int fold,
                                                     std::size_t outer, const std::vector<double>& lambda1_desc)>;

/// Held-out MSE for every (outer, lambda_1, fold). Fold assignment comes from a
/// seeded shuffle; cells run on `threads` workers and are stored by index.
struct PathCvTable {
    std::vector<double> lambda1_desc;
    // mse[outer][l][fold]
    std::vector<std::vector<std::vector<double>>> mse;

    double mean(std::size_t outer, std::size_t l) const {
        const auto& v = mse[outer][l];
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
};

inline PathCvTable path_cross_validate(const Matrix& x, const Vector& y, std::size_t n_outer,
                                       std::vector<double> lambda1, const PathFitter& fitter, int folds,
                                       std::uint64_t seed, unsigned threads = 1) {
    detail::require(x.rows() == y.size(), "cross_validate: X rows must match y length");
    detail::require(folds >= 2, "cross_validate: folds must be >= 2");
    detail::require(!lambda1.empty() && n_outer > 0, "cross_validate: empty grid");
    detail::require(x.rows() >= folds, "cross_validate: fewer rows than folds");
    std::sort(lambda1.begin(), lambda1.end(), std::greater<>());

    const auto label = fold_labels(x.rows(), folds, seed);
    std::vector<std::vector<Index>> train(static_cast<std::size_t>(folds)), test(static_cast<std::size_t>(folds));
    for (Index i = 0; i < x.rows(); ++i)
        for (int f = 0; f < folds; ++f)
            (label[static_cast<std::size_t>(i)] == f ? test : train)[static_cast<std::size_t>(f)].push_back(i);

    PathCvTable table;
    table.lambda1_desc = lambda1;
    table.mse.assign(n_outer, std::vector<std::vector<double>>(lambda1.size(), std::vector<double>(static_cast<std::size_t>(folds))));

    const std::size_t cells = n_outer * static_cast<std::size_t>(folds);
    parallel_for(
        cells,
        [&](std::size_t c) {
            const std::size_t outer = c / static_cast<std::size_t>(folds);
            const int f = static_cast<int>(c % static_cast<std::size_t>(folds));
            const auto& tr = train[static_cast<std::size_t>(f)];
            const auto& te = test[static_cast<std::size_t>(f)];
            const Matrix xtr = select_rows(x, tr), xte = select_rows(x, te);
            const Vector ytr = select_rows(y, tr), yte = select_rows(y, te);
            const auto path = fitter(xtr, ytr, f, outer, lambda1);
            for (std::size_t l = 0; l < lambda1.size(); ++l)
                table.mse[outer][l][static_cast<std::size_t>(f)] =
                    (yte - xte * path[l]).squaredNorm() / static_cast<double>(te.size());
        },
        threads);
    return table;
}

namespace detail {

// Index of the smallest mean; ties resolved by `prefer(a, b)` = a preferred over b.
template <class Prefer>
std::pair<std::size_t, std::size_t> argmin_cell(const PathCvTable& t, Prefer prefer) {
    std::size_t bo = 0, bl = 0;
    double best = t.mean(0, 0);
    for (std::size_t o = 0; o < t.mse.size(); ++o)
        for (std::size_t l = 0; l < t.lambda1_desc.size(); ++l) {
            const double v = t.mean(o, l);
            const double tol = 1e-12 * std::max({1.0, std::abs(v), std::abs(best)});
            if (v < best - tol || (std::abs(v - best) <= tol && prefer(o, l, bo, bl))) {
                best = v;
                bo = o;
                bl = l;
            }
        }
    return {bo, bl};
}

}  // namespace detail

/// Builds the covariance graph from a fold's training design.
using GraphBuilder = std::function<CovarianceGraph(const Matrix& x_train)>;

/// Exhaustive CV over (lambda_1, lambda_tv, lambda_s). Each (fold, lambda_tv,
/// lambda_s) cell runs the lambda_1 path in decreasing order with warm starts.
/// Selects the minimum mean held-out MSE; ties go to larger lambda_1, then
/// larger lambda_tv, then larger lambda_s.
inline CvResult cross_validate(const Matrix& x, const Vector& y, const GraphBuilder& build, const CvGrids& grids,
                               const CvOptions& opts = {}) {
    detail::require(!grids.lambda1.empty() && !grids.lambda_tv.empty() && !grids.lambda_s.empty(),
                    "cross_validate: empty grid");
    detail::require(opts.folds >= 2, "cross_validate: folds must be >= 2");
    detail::require(x.rows() >= opts.folds, "cross_validate: fewer rows than folds");

    // Graphs depend only on the training rows, so build one per fold up front.
    const auto label = fold_labels(x.rows(), opts.folds, opts.seed);
    std::vector<CovarianceGraph> graphs;
    for (int f = 0; f < opts.folds; ++f) {
        std::vector<Index> tr;
        for (Index i = 0; i < x.rows(); ++i)
            if (label[static_cast<std::size_t>(i)] != f) tr.push_back(i);
        graphs.push_back(build(select_rows(x, tr)));
    }

    const std::size_t n_tv = grids.lambda_tv.size(), n_s = grids.lambda_s.size();
    PathFitter fitter = [&](const Matrix& xtr, const Vector& ytr, int fold, std::size_t outer,
                            const std::vector<double>& l1) {
        const double ltv = grids.lambda_tv[outer / n_s], ls = grids.lambda_s[outer % n_s];
        GtvSolver solver(xtr, ytr, incidence(graphs[static_cast<std::size_t>(fold)], ltv));
        AdmmState state;
        std::vector<Vector> path;
        for (double lam : l1) {
            GtvConfig cfg = opts.solver;
            cfg.lambda_1 = lam;
            cfg.lambda_tv = ltv;
            cfg.lambda_s = ls;
            path.push_back(solver.solve(cfg, &state).beta);
        }
        return path;
    };
    const auto table = path_cross_validate(x, y, n_tv * n_s, grids.lambda1, fitter, opts.folds, opts.seed, opts.threads);

    const auto [bo, bl] = detail::argmin_cell(table, [&](std::size_t o, std::size_t l, std::size_t bo_, std::size_t bl_) {
        const double a1 = table.lambda1_desc[l], b1 = table.lambda1_desc[bl_];
        if (a1 != b1) return a1 > b1;
        const double atv = grids.lambda_tv[o / n_s], btv = grids.lambda_tv[bo_ / n_s];
        if (atv != btv) return atv > btv;
        return grids.lambda_s[o % n_s] > grids.lambda_s[bo_ % n_s];
    });

    CvResult out;
    out.best = opts.solver;
    out.best.lambda_1 = table.lambda1_desc[bl];
    out.best.lambda_tv = grids.lambda_tv[bo / n_s];
    out.best.lambda_s = grids.lambda_s[bo % n_s];
    out.best_mse = table.mean(bo, bl);
    for (std::size_t o = 0; o < n_tv * n_s; ++o)
        for (std::size_t l = 0; l < table.lambda1_desc.size(); ++l)
            for (int f = 0; f < opts.folds; ++f)
                out.table.push_back({table.lambda1_desc[l], grids.lambda_tv[o / n_s], grids.lambda_s[o % n_s], f,
                                     table.mse[o][l][static_cast<std::size_t>(f)]});
    return out;
}

/// Selected penalties of a two-parameter baseline (lambda_1 and a secondary penalty).
struct BaselineSelection {
    double lambda1 = 0.0;
    double secondary = 0.0;
    double mse = 0.0;
};

/// CV for the Elastic Net. Grids are on the (1/n) scale of the GTV objective:
/// the pair (l1, ls) fits the same model as fit_elastic_net(n l1, n ls).
inline BaselineSelection cross_validate_elastic_net(const Matrix& x, const Vector& y, const std::vector<double>& lambda1,
                                                    const std::vector<double>& lambda_s, const CvOptions& opts = {}) {
    detail::require(!lambda_s.empty(), "cross_validate_elastic_net: empty grid");
    const IncidenceSystem eye = identity_system(x.cols());
    PathFitter fitter = [&](const Matrix& xtr, const Vector& ytr, int, std::size_t outer, const std::vector<double>& l1) {
        GtvSolver solver(xtr, ytr, eye);
        AdmmState state;
        std::vector<Vector> path;
        for (double lam : l1) {
            GtvConfig cfg = opts.solver;
            cfg.lambda_1 = lam;
            cfg.lambda_tv = 0.0;
            cfg.lambda_s = lambda_s[outer];
            path.push_back(solver.solve(cfg, &state).beta);
        }
        return path;
    };
    const auto t = path_cross_validate(x, y, lambda_s.size(), lambda1, fitter, opts.folds, opts.seed, opts.threads);
    const auto [bo, bl] = detail::argmin_cell(t, [&](std::size_t o, std::size_t l, std::size_t bo_, std::size_t bl_) {
        if (t.lambda1_desc[l] != t.lambda1_desc[bl_]) return t.lambda1_desc[l] > t.lambda1_desc[bl_];
        return lambda_s[o] > lambda_s[bo_];
    });
    return {t.lambda1_desc[bl], lambda_s[bo], t.mean(bo, bl)};
}

/// CV for OWL with OSCAR weights. Grids are on the (1/n) scale and are
/// multiplied by the training size before calling fit_owl.
inline BaselineSelection cross_validate_owl(const Matrix& x, const Vector& y, const std::vector<double>& lambda1,
                                            const std::vector<double>& lambda2, const CvOptions& opts = {}) {
    detail::require(!lambda2.empty(), "cross_validate_owl: empty grid");
    PathFitter fitter = [&](const Matrix& xtr, const Vector& ytr, int, std::size_t outer, const std::vector<double>& l1) {
        const double n = static_cast<double>(xtr.rows());
        std::vector<Vector> path;
        Vector warm = Vector::Zero(xtr.cols());
        for (double lam : l1) {
            auto r = fit_owl(xtr, ytr, n * lam, n * lambda2[outer], opts.solver, &warm);
            warm = r.beta;
            path.push_back(std::move(r.beta));
        }
        return path;
    };
    const auto t = path_cross_validate(x, y, lambda2.size(), lambda1, fitter, opts.folds, opts.seed, opts.threads);
    const auto [bo, bl] = detail::argmin_cell(t, [&](std::size_t o, std::size_t l, std::size_t bo_, std::size_t bl_) {
        if (t.lambda1_desc[l] != t.lambda1_desc[bl_]) return t.lambda1_desc[l] > t.lambda1_desc[bl_];
        return lambda2[o] > lambda2[bo_];
    });
    return {t.lambda1_desc[bl], lambda2[bo], t.mean(bo, bl)};
}

}  // namespace gtv

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtv/random.hpp"
#include "gtv/types.hpp"

namespace gtv {

enum class CovarianceSource { sample, hard_thresholded, side_info, population };

inline const char* to_string(CovarianceSource s) {
    switch (s) {
        case CovarianceSource::sample: return "sample";
        case CovarianceSource::hard_thresholded: return "hard_thresholded";
        case CovarianceSource::side_info: return "side_info";
        case CovarianceSource::population: return "population";
    }
    return "unknown";
}

inline CovarianceSource covariance_source_from_string(const std::string& s) {
    if (s == "sample") return CovarianceSource::sample;
    if (s == "hard_thresholded") return CovarianceSource::hard_thresholded;
    if (s == "side_info") return CovarianceSource::side_info;
    if (s == "population") return CovarianceSource::population;
    throw invalid_input("unknown covariance source '" + s + "'");
}

/// Symmetric p x p covariance estimate together with how it was produced.
/// `threshold` is meaningful only for hard_thresholded estimates.
struct CovarianceEstimate {
    Matrix matrix;
    CovarianceSource source = CovarianceSource::sample;
    double threshold = 0.0;

    Index p() const { return matrix.rows(); }
};

/// Eigenvalue cap c_u and row-sum floor c_l of a covariance matrix.
struct AssumptionInputs {
    double c_u = 1.0;
    double c_l = 1.0;
};

inline AssumptionInputs assumption_inputs_from(const Matrix& sigma) {
    detail::require_square(sigma, "sigma");
    detail::require(sigma.rows() > 0, "sigma must be non-empty");
    AssumptionInputs in;
    in.c_u = detail::max_eigenvalue(0.5 * (sigma + sigma.transpose()));
    in.c_l = sigma.cwiseAbs().rowwise().sum().minCoeff();
    return in;
}

struct SampleCovarianceOptions {
    bool center = false;    // subtract column means first
    bool unbiased = false;  // divide by n-1 instead of n
};

/// (1/n) X^T X, optionally after column centering.
inline CovarianceEstimate sample_covariance(const Matrix& x, const SampleCovarianceOptions& opts = {}) {
    detail::require(x.rows() >= 1, "sample_covariance needs at least one row");
    detail::require_finite(x, "X");
    const double n = static_cast<double>(x.rows());
    double denom = n;
    if (opts.unbiased) {
        detail::require(x.rows() >= 2, "unbiased sample covariance needs n >= 2");
        denom = n - 1.0;
    }
    CovarianceEstimate out;
    out.source = CovarianceSource::sample;
    if (opts.center) {
        const Matrix xc = x.rowwise() - x.colwise().mean();
        out.matrix = (xc.transpose() * xc) / denom;
    } else {
        out.matrix = (x.transpose() * x) / denom;
    }
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
    return out;
}

/// Entrywise S_jk * 1(|S_jk| >= t). The diagonal is thresholded like any entry.
inline CovarianceEstimate hard_threshold(const CovarianceEstimate& s, double t) {
    detail::require(t >= 0.0 && std::isfinite(t), "threshold must be finite and >= 0");
    detail::require_square(s.matrix, "covariance");
    CovarianceEstimate out;
    out.matrix = s.matrix.unaryExpr([t](double v) { return std::abs(v) >= t ? v : 0.0; });
    out.source = CovarianceSource::hard_thresholded;
    out.threshold = t;
    return out;
}

/// Row split for threshold cross-validation: estimate on `train`, score on `test`.
struct RowSplit {
    std::vector<Index> train;
    std::vector<Index> test;
};

struct ThresholdSelection {
    double threshold = 0.0;
    std::vector<double> mean_loss;  // one per grid value, grid order
};

/// Picks the grid threshold minimizing the mean squared Frobenius distance
/// between the thresholded training covariance and the held-out sample
/// covariance over the given splits. Ties go to the larger threshold.
inline ThresholdSelection select_threshold_cv(const Matrix& x, const std::vector<double>& grid,
                                              const std::vector<RowSplit>& splits,
                                              const SampleCovarianceOptions& opts = {}) {
    detail::require(!grid.empty(), "threshold grid is empty");
    detail::require(!splits.empty(), "no CV splits given");
    for (double t : grid) detail::require(t >= 0.0 && std::isfinite(t), "grid thresholds must be >= 0");

    ThresholdSelection sel;
    sel.mean_loss.assign(grid.size(), 0.0);
    for (const auto& split : splits) {
        detail::require(!split.train.empty() && !split.test.empty(), "empty CV split");
        const auto train = sample_covariance(select_rows(x, split.train), opts);
        const auto test = sample_covariance(select_rows(x, split.test), opts);
        for (std::size_t g = 0; g < grid.size(); ++g)
            sel.mean_loss[g] += (hard_threshold(train, grid[g]).matrix - test.matrix).squaredNorm();
    }
    for (double& l : sel.mean_loss) l /= static_cast<double>(splits.size());

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double a = sel.mean_loss[g], b = sel.mean_loss[best];
        const double tie_tol = 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
        if (a < b - tie_tol || (std::abs(a - b) <= tie_tol && grid[g] > grid[best])) best = g;
    }
    sel.threshold = grid[best];
    return sel;
}

/// Random `folds`-way partitions repeated `repeats` times; every fold serves
/// once as the held-out set in each repeat.
inline std::vector<RowSplit> random_splits(Index n, int folds, int repeats, std::uint64_t seed) {
    detail::require(folds >= 2, "folds must be >= 2");
    detail::require(repeats >= 1, "repeats must be >= 1");
    detail::require(n >= folds, "need at least as many rows as folds");
    std::vector<RowSplit> splits;
    for (int r = 0; r < repeats; ++r) {
        const auto label = fold_labels(n, folds, child_seed(seed, static_cast<std::uint64_t>(r)));
        for (int f = 0; f < folds; ++f) {
            RowSplit s;
            for (Index i = 0; i < n; ++i)
                (label[static_cast<std::size_t>(i)] == f ? s.test : s.train).push_back(i);
            splits.push_back(std::move(s));
        }
    }
    return splits;
}

inline ThresholdSelection select_threshold_cv(const Matrix& x, const std::vector<double>& grid, int folds = 2,
                                              int repeats = 10, std::uint64_t seed = 0,
                                              const SampleCovarianceOptions& opts = {}) {
    detail::require(folds >= 2, "folds must be >= 2");
    if (x.rows() < folds) throw invalid_input("n < folds in threshold cross-validation");
    return select_threshold_cv(x, grid, random_splits(x.rows(), folds, repeats, seed), opts);
}

/// `count` log-spaced thresholds from `lo_frac` * max|S_jk| (j != k) up to that
/// maximum, with 0 prepended.
inline std::vector<double> default_threshold_grid(const Matrix& s, int count = 20, double lo_frac = 0.02) {
    double top = 0.0;
    for (Index j = 0; j < s.rows(); ++j)
        for (Index k = j + 1; k < s.cols(); ++k) top = std::max(top, std::abs(s(j, k)));
    std::vector<double> grid{0.0};
    if (top <= 0.0 || count < 1) return grid;
    if (count == 1) {
        grid.push_back(top);
        return grid;
    }
    const double lo = std::log(lo_frac * top), hi = std::log(top);
    for (int i = 0; i < count; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / (count - 1)));
    return grid;
}

/// Side-information covariance A^T Sigma_s A, where A is the least-squares fit
/// of X on the feature matrix S and Sigma_s the centered (1/n) covariance of
/// the rows of S. Throws when S is column-rank deficient and names the
/// columns that are linear combinations of the others.
inline CovarianceEstimate sideinfo_covariance(const Matrix& s_feat, const Matrix& x) {
    detail::require(s_feat.rows() == x.rows(), "feature matrix and X must have the same row count");
    detail::require(s_feat.rows() >= 1, "side information needs at least one row");
    detail::require(s_feat.cols() <= s_feat.rows(), "side information needs K <= n");
    detail::require_finite(s_feat, "feature matrix");
    detail::require_finite(x, "X");

    Eigen::ColPivHouseholderQR<Matrix> qr(s_feat);
    qr.setThreshold(1e-10);
    if (qr.rank() < s_feat.cols()) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Index i = qr.rank(); i < s_feat.cols(); ++i) {
            if (!cols.empty()) cols += ", ";
            cols += std::to_string(perm(i));
        }
        throw invalid_input("feature matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(s_feat.cols()) + "); collinear columns: " + cols);
    }
    const Matrix a_hat = qr.solve(x);  // K x p
    const Matrix sc = s_feat.rowwise() - s_feat.colwise().mean();
    const Matrix sigma_s = (sc.transpose() * sc) / static_cast<double>(s_feat.rows());

    CovarianceEstimate out;
    out.matrix = a_hat.transpose() * sigma_s * a_hat;
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
    out.source = CovarianceSource::side_info;
    return out;
}

/// max_j sum_k |A_jk - B_jk|
inline double l11_distance(const Matrix& a, const Matrix& b) {
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "l11_distance: dimension mismatch");
    if (a.size() == 0) return 0.0;
    return (a - b).cwiseAbs().rowwise().sum().maxCoeff();
}

struct L11Check {
    double distance = 0.0;
    std::optional<bool> within_quarter_floor;  // distance <= c_l / 4
};

inline L11Check l11_check(const Matrix& estimate, const Matrix& truth, std::optional<AssumptionInputs> in = {}) {
    L11Check c;
    c.distance = l11_distance(estimate, truth);
    if (in) {
        detail::require(in->c_l > 0.0 && in->c_u > 0.0, "assumption constants must be positive");
        c.within_quarter_floor = c.distance <= in->c_l / 4.0;
    }
    return c;
}

}  // namespace gtv

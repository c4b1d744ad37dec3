#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtv/graph.hpp"
#include "gtv/types.hpp"

namespace gtv {

/// Penalty triple plus ADMM controls.
///
/// The solved problem is
///   (1/n)||y - X b||^2 + lambda_s ||Gamma b||^2 + lambda_1 (lambda_tv ||Gamma b||_1 + ||b||_1).
/// lambda_1 = 0 is the ridge limit (no l1 terms).
struct GtvConfig {
    double lambda_1 = 0.0;
    double lambda_tv = 0.0;
    double lambda_s = 0.0;
    int max_iters = 10000;
    double tol_primal = 1e-6;
    double tol_dual = 1e-6;
    double admm_rho = 1.0;
    bool adapt_rho = true;

    void validate() const {
        detail::require(lambda_1 >= 0.0 && std::isfinite(lambda_1), "lambda_1 must be finite and >= 0");
        detail::require(lambda_tv >= 0.0 && std::isfinite(lambda_tv), "lambda_tv must be finite and >= 0");
        detail::require(lambda_s >= 0.0 && std::isfinite(lambda_s), "lambda_s must be finite and >= 0");
        detail::require(tol_primal > 0.0 && tol_dual > 0.0, "tolerances must be > 0");
        detail::require(admm_rho > 0.0, "admm_rho must be > 0");
        detail::require(max_iters >= 1, "max_iters must be >= 1");
    }
};

struct FitResult {
    Vector beta;
    double objective = 0.0;
    double kkt_residual = 0.0;  // on the (1/n)-normalized scale
    int iterations = 0;
    bool converged = false;
};

/// Threshold below which a coefficient is treated as outside the support.
inline constexpr double kSupportTol = 1e-6;

inline std::vector<Index> support_of(const Vector& beta, double tol = kSupportTol) {
    std::vector<Index> s;
    for (Index j = 0; j < beta.size(); ++j)
        if (std::abs(beta(j)) > tol) s.push_back(j);
    return s;
}

inline double objective(const Vector& beta, const Matrix& x, const Vector& y, const IncidenceSystem& sys,
                        const GtvConfig& cfg) {
    detail::require(x.rows() == y.size() && x.cols() == beta.size(), "objective: dimension mismatch");
    detail::require(sys.p() == beta.size(), "objective: graph size mismatch");
    detail::require(x.rows() >= 1, "objective: empty data");
    const Vector gb = sys.gamma * beta;
    return (y - x * beta).squaredNorm() / static_cast<double>(x.rows()) + cfg.lambda_s * gb.squaredNorm() +
           cfg.lambda_1 * (cfg.lambda_tv * gb.lpNorm<1>() + beta.lpNorm<1>());
}

/// ADMM iterate (beta, split variable z = Gamma_tilde beta, scaled dual u).
struct AdmmState {
    Vector beta;
    Vector z;
    Vector u;
    double rho = 1.0;
    double lambda_1 = 0.0;
};

namespace detail {

inline SparseMatrix stacked_operator(const SparseMatrix& gamma, double lambda_tv) {
    const Index m = gamma.rows(), p = gamma.cols();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(gamma.nonZeros() + p));
    if (lambda_tv > 0.0)
        for (Index r = 0; r < m; ++r)
            for (SparseMatrix::InnerIterator it(gamma, r); it; ++it) trip.emplace_back(r, it.col(), lambda_tv * it.value());
    for (Index i = 0; i < p; ++i) trip.emplace_back(m + i, i, 1.0);
    SparseMatrix d(m + p, p);
    d.setFromTriplets(trip.begin(), trip.end());
    return d;
}

/// Smallest ||grad + lambda_1 D^T g||_inf over subgradients g of ||.||_1 at z.
/// Entries with z != 0 are pinned to sign(z); the rest start from `g0` and are
/// refined by projected gradient on the squared l2 residual.
inline double min_subgradient_residual(const Vector& grad, const SparseMatrix& d, const Vector& z, double lambda_1,
                                       const Vector& g0, double op_norm_sq, int sweeps = 100) {
    if (lambda_1 <= 0.0) return grad.lpNorm<Eigen::Infinity>();
    Vector g = g0.cwiseMax(-1.0).cwiseMin(1.0);
    std::vector<char> pinned(static_cast<std::size_t>(z.size()), 0);
    for (Index i = 0; i < z.size(); ++i)
        if (z(i) != 0.0) {
            g(i) = z(i) > 0 ? 1.0 : -1.0;
            pinned[static_cast<std::size_t>(i)] = 1;
        }
    Vector r = grad + lambda_1 * (d.transpose() * g);
    double best = r.lpNorm<Eigen::Infinity>();
    const double step = 1.0 / (lambda_1 * lambda_1 * std::max(op_norm_sq, 1e-300));
    for (int it = 0; it < sweeps && best > 0.0; ++it) {
        const Vector dir = lambda_1 * (d * r);
        for (Index i = 0; i < g.size(); ++i)
            if (!pinned[static_cast<std::size_t>(i)]) g(i) = std::clamp(g(i) - step * dir(i), -1.0, 1.0);
        r = grad + lambda_1 * (d.transpose() * g);
        best = std::min(best, r.lpNorm<Eigen::Infinity>());
    }
    return best;
}

// Gershgorin bound on lambda_max(D^T D).
inline double gram_norm_bound(const Matrix& laplacian, double lambda_tv) {
    const double lap = laplacian.size() ? laplacian.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    return 1.0 + lambda_tv * lambda_tv * lap;
}

}  // namespace detail

/// GTV solver bound to one data set and one incidence matrix. Holds the
/// sufficient statistics and a cached Cholesky factor of the beta-update
/// system, so a lambda_1 path reuses both. Not thread-safe; give each task
/// its own instance.
class GtvSolver {
public:
    GtvSolver(const Matrix& x, const Vector& y, const IncidenceSystem& sys)
        : n_(static_cast<double>(x.rows())), gamma_(sys.gamma), laplacian_(sys.laplacian) {
        detail::require(x.rows() == y.size(), "fit_gtv: X rows must match y length");
        detail::require(x.cols() == sys.p(), "fit_gtv: X columns must match graph size");
        detail::require(x.rows() >= 1, "fit_gtv: empty data");
        detail::require_finite(x, "X");
        detail::require(y.allFinite(), "y contains non-finite entries");
        xtx_n_ = (x.transpose() * x) / n_;
        xty_n_ = (x.transpose() * y) / n_;
        yty_n_ = y.squaredNorm() / n_;
    }

    Index p() const { return xtx_n_.rows(); }
    Index m() const { return gamma_.rows(); }

    /// (1/n)-scaled gradient bound: beta = 0 is optimal once lambda_1 reaches it.
    double lambda1_zero_threshold() const { return 2.0 * xty_n_.lpNorm<Eigen::Infinity>(); }

    double objective(const Vector& beta, const GtvConfig& cfg) const {
        const Vector gb = gamma_ * beta;
        const double fit = yty_n_ - 2.0 * xty_n_.dot(beta) + beta.dot(xtx_n_ * beta);
        return std::max(fit, 0.0) + cfg.lambda_s * gb.squaredNorm() +
               cfg.lambda_1 * (cfg.lambda_tv * gb.lpNorm<1>() + beta.lpNorm<1>());
    }

    FitResult solve(const GtvConfig& cfg, AdmmState* state = nullptr) {
        cfg.validate();
        const Index p = this->p(), m = this->m();
        const SparseMatrix d = detail::stacked_operator(gamma_, cfg.lambda_tv);
        const Matrix hess = 2.0 * xtx_n_ + 2.0 * cfg.lambda_s * laplacian_;  // Hessian of the smooth part
        const Vector lin = 2.0 * xty_n_;
        const Matrix dtd = cfg.lambda_tv * cfg.lambda_tv * laplacian_ + Matrix::Identity(p, p);
        const double op_norm_sq = detail::gram_norm_bound(laplacian_, cfg.lambda_tv);

        AdmmState local;
        AdmmState& st = state ? *state : local;
        const bool warm = st.beta.size() == p && st.z.size() == m + p && st.u.size() == m + p;
        if (!warm) {
            st.beta = Vector::Zero(p);
            st.z = Vector::Zero(m + p);
            st.u = Vector::Zero(m + p);
            st.rho = cfg.admm_rho;
        } else if (st.lambda_1 > 0.0 && cfg.lambda_1 > 0.0) {
            st.u *= cfg.lambda_1 / st.lambda_1;  // keep rho*u on the new subgradient scale
        }
        st.lambda_1 = cfg.lambda_1;

        FitResult res;
        if (cfg.lambda_1 > 0.0 && cfg.lambda_1 >= lambda1_zero_threshold()) {
            // beta = 0 is optimal; certificate g = -grad(0)/lambda_1 on the identity rows.
            st.beta.setZero();
            st.z.setZero();
            st.u = Vector::Zero(m + p);
            st.u.tail(p) = lin / st.rho;
            res.beta = Vector::Zero(p);
            res.objective = objective(res.beta, cfg);
            Vector g0 = Vector::Zero(m + p);
            g0.tail(p) = lin / cfg.lambda_1;
            res.kkt_residual = detail::min_subgradient_residual(-lin, d, Vector::Zero(m + p), cfg.lambda_1, g0, op_norm_sq);
            res.converged = true;
            return res;
        }

        if (cfg.lambda_1 == 0.0) {
            // Ridge limit: solve the normal equations directly when they are definite.
            Eigen::LLT<Matrix> direct(hess);
            if (direct.info() == Eigen::Success) {
                res.beta = direct.solve(lin);
                st.beta = res.beta;
                st.z = d * res.beta;
                st.u.setZero();
                res.kkt_residual = (hess * res.beta - lin).lpNorm<Eigen::Infinity>();
                res.objective = objective(res.beta, cfg);
                res.converged = true;
                return res;
            }
        }

        auto factor = [&](double rho) {
            llt_.compute(hess + rho * dtd);
            if (llt_.info() != Eigen::Success) throw numerical_error("beta-update system is not positive definite");
        };
        factor(st.rho);

        const double sqrt_mp = std::sqrt(static_cast<double>(m + p));
        const double sqrt_p = std::sqrt(static_cast<double>(p));
        const double kkt_target = 10.0 * std::min(cfg.tol_primal, cfg.tol_dual);
        double tighten = 1.0;
        Vector db(m + p), z_old(m + p);

        for (int it = 1; it <= cfg.max_iters; ++it) {
            st.beta = llt_.solve(lin + st.rho * (d.transpose() * (st.z - st.u)));
            db = d * st.beta;
            z_old = st.z;
            const double thr = cfg.lambda_1 / st.rho;
            for (Index i = 0; i < m + p; ++i) st.z(i) = detail::soft_threshold(db(i) + st.u(i), thr);
            st.u += db - st.z;

            const double r_norm = (db - st.z).norm();
            const double s_norm = st.rho * (d.transpose() * (st.z - z_old)).norm();
            const double eps_pri = tighten * cfg.tol_primal * (sqrt_mp + std::max(db.norm(), st.z.norm()));
            const double eps_dual = tighten * cfg.tol_dual * (sqrt_p + st.rho * (d.transpose() * st.u).norm());
            res.iterations = it;

            if (r_norm <= eps_pri && s_norm <= eps_dual) {
                res.beta = polished(st);
                res.kkt_residual = kkt(res.beta, st, d, hess, lin, cfg.lambda_1, op_norm_sq);
                if (res.kkt_residual <= kkt_target || tighten < 1e-4) {
                    res.converged = res.kkt_residual <= kkt_target;
                    res.objective = objective(res.beta, cfg);
                    return res;
                }
                tighten *= 0.1;
            }

            if (cfg.adapt_rho && it % 10 == 0) {
                double scale = 1.0;
                if (r_norm > 10.0 * s_norm) scale = 2.0;
                else if (s_norm > 10.0 * r_norm) scale = 0.5;
                if (scale != 1.0) {
                    st.rho *= scale;
                    st.u /= scale;
                    factor(st.rho);
                }
            }
        }
        res.beta = polished(st);
        res.kkt_residual = kkt(res.beta, st, d, hess, lin, cfg.lambda_1, op_norm_sq);
        res.objective = objective(res.beta, cfg);
        res.converged = false;
        return res;
    }

private:
    // Coordinates whose identity-row split variable is exactly zero are set to zero.
    Vector polished(const AdmmState& st) const {
        Vector b = st.beta;
        const Index m = this->m();
        for (Index j = 0; j < b.size(); ++j)
            if (st.z(m + j) == 0.0) b(j) = 0.0;
        return b;
    }

    double kkt(const Vector& beta, const AdmmState& st, const SparseMatrix& d, const Matrix& hess, const Vector& lin,
               double lambda_1, double op_norm_sq) const {
        const Vector grad = hess * beta - lin;
        if (lambda_1 <= 0.0) return grad.lpNorm<Eigen::Infinity>();
        const Vector g0 = st.rho * st.u / lambda_1;
        return detail::min_subgradient_residual(grad, d, st.z, lambda_1, g0, op_norm_sq);
    }

    double n_;
    SparseMatrix gamma_;
    Matrix laplacian_;
    Matrix xtx_n_;
    Vector xty_n_;
    double yty_n_ = 0.0;
    Eigen::LLT<Matrix> llt_;
};

/// Solves the GTV problem by ADMM on the split z = [lambda_tv Gamma; I] beta.
/// `cfg.lambda_tv` is authoritative; `sys.gamma_tilde` is not consulted.
inline FitResult fit_gtv(const Matrix& x, const Vector& y, const IncidenceSystem& sys, const GtvConfig& cfg,
                         AdmmState* warm = nullptr) {
    GtvSolver solver(x, y, sys);
    return solver.solve(cfg, warm);
}

inline FitResult fit_lasso(const Matrix& x, const Vector& y, double lambda_1, GtvConfig cfg = {}) {
    CovarianceGraph empty;
    empty.p = x.cols();
    cfg.lambda_1 = lambda_1;
    cfg.lambda_tv = 0.0;
    cfg.lambda_s = 0.0;
    return fit_gtv(x, y, incidence(empty, 0.0), cfg);
}

/// Elastic Net in its unnormalized form
///   ||y - X b||^2 + lambda_1 ||b||_1 + lambda_s ||b||^2,
/// solved as a GTV problem with Gamma = I, lambda_tv = 0 and both penalties
/// divided by n. The reported objective is on the unnormalized scale.
inline FitResult fit_elastic_net(const Matrix& x, const Vector& y, double lambda_1, double lambda_s,
                                 GtvConfig cfg = {}) {
    detail::require(lambda_1 >= 0.0 && lambda_s >= 0.0, "elastic net penalties must be >= 0");
    detail::require(x.rows() >= 1, "fit_elastic_net: empty data");
    const double n = static_cast<double>(x.rows());
    cfg.lambda_1 = lambda_1 / n;
    cfg.lambda_s = lambda_s / n;
    cfg.lambda_tv = 0.0;
    FitResult r = fit_gtv(x, y, identity_system(x.cols()), cfg);
    r.objective *= n;
    return r;
}

inline double elastic_net_objective(const Vector& beta, const Matrix& x, const Vector& y, double lambda_1,
                                    double lambda_s) {
    return (y - x * beta).squaredNorm() + lambda_1 * beta.lpNorm<1>() + lambda_s * beta.squaredNorm();
}

}  // namespace gtv

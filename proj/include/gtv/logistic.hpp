#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "gtv/solver.hpp"
#include "gtv/types.hpp"

namespace gtv {

namespace detail {

// log(1 + exp(t)) without overflow.
inline double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Euclidean projection onto {x : ||x||_1 <= radius}.
inline Vector project_l1_ball(const Vector& v, double radius) {
    if (v.lpNorm<1>() <= radius) return v;
    std::vector<double> a(v.data(), v.data() + v.size());
    for (double& e : a) e = std::abs(e);
    std::sort(a.begin(), a.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cum += a[k];
        const double cand = (cum - radius) / static_cast<double>(k + 1);
        if (k + 1 == a.size() || a[k + 1] <= cand) {
            theta = cand;
            break;
        }
    }
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) out(i) = soft_threshold(v(i), theta);
    return out;
}

}  // namespace detail

/// (1/n) sum_i [log(1 + exp(x_i b)) - y_i x_i b]
inline double logistic_loss(const Vector& beta, const Matrix& x, const Vector& y01) {
    const Vector eta = x * beta;
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += detail::log1pexp(eta(i)) - y01(i) * eta(i);
    return s / static_cast<double>(x.rows());
}

inline double logistic_objective(const Vector& beta, const Matrix& x, const Vector& y01, const IncidenceSystem& sys,
                                 const GtvConfig& cfg) {
    const Vector gb = sys.gamma * beta;
    return logistic_loss(beta, x, y01) + cfg.lambda_s * gb.squaredNorm() +
           cfg.lambda_1 * (cfg.lambda_tv * gb.lpNorm<1>() + beta.lpNorm<1>());
}

/// Logistic GTV:
///   (1/n) logistic loss + lambda_s ||Gamma b||^2 + lambda_1 (lambda_tv ||Gamma b||_1 + ||b||_1),
/// optionally subject to ||b||_1 <= ball_u. Linearized ADMM on z = [lambda_tv Gamma; I] b:
/// the beta-update is one damped Newton step on the augmented Lagrangian, the
/// z-update a soft-threshold (followed by an l1-ball projection of the
/// coordinate block when ball_u is set).
inline FitResult fit_logistic_gtv(const Matrix& x, const Vector& y01, const IncidenceSystem& sys, const GtvConfig& cfg,
                                  std::optional<double> ball_u = std::nullopt) {
    cfg.validate();
    detail::require(x.rows() == y01.size(), "fit_logistic_gtv: X rows must match y length");
    detail::require(x.cols() == sys.p(), "fit_logistic_gtv: X columns must match graph size");
    detail::require(x.rows() >= 1, "fit_logistic_gtv: empty data");
    for (Index i = 0; i < y01.size(); ++i)
        detail::require(y01(i) == 0.0 || y01(i) == 1.0, "fit_logistic_gtv: responses must be 0 or 1");
    if (ball_u) detail::require(*ball_u > 0.0, "ball_u must be positive");

    const Index p = x.cols(), m = sys.m();
    const double n = static_cast<double>(x.rows());
    const SparseMatrix d = detail::stacked_operator(sys.gamma, cfg.lambda_tv);
    const Matrix dtd = cfg.lambda_tv * cfg.lambda_tv * sys.laplacian + Matrix::Identity(p, p);
    const Matrix quad = 2.0 * cfg.lambda_s * sys.laplacian;

    auto smooth_grad = [&](const Vector& b) -> Vector {
        const Vector eta = x * b;
        Vector r(eta.size());
        for (Index i = 0; i < eta.size(); ++i) r(i) = detail::sigmoid(eta(i)) - y01(i);
        return x.transpose() * r / n + quad * b;
    };
    auto smooth_hess = [&](const Vector& b) -> Matrix {
        const Vector eta = x * b;
        Vector wts(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            const double s = detail::sigmoid(eta(i));
            wts(i) = s * (1.0 - s);
        }
        return x.transpose() * wts.asDiagonal() * x / n + quad;
    };
    auto smooth_val = [&](const Vector& b) { return logistic_loss(b, x, y01) + cfg.lambda_s * b.dot(sys.laplacian * b); };

    Vector beta = Vector::Zero(p), z = Vector::Zero(m + p), u = Vector::Zero(m + p);
    double rho = cfg.admm_rho;
    const double sqrt_mp = std::sqrt(static_cast<double>(m + p));
    const double sqrt_p = std::sqrt(static_cast<double>(p));
    const double kkt_target = 10.0 * std::min(cfg.tol_primal, cfg.tol_dual);
    double tighten = 1.0;

    auto kkt = [&](const Vector& b, const Vector& uu, double rr) {
        return (smooth_grad(b) + d.transpose() * (rr * uu)).lpNorm<Eigen::Infinity>();
    };

    FitResult res;
    Vector db(m + p), z_old(m + p);
    for (int it = 1; it <= cfg.max_iters; ++it) {
        // One damped Newton step on f(b) + (rho/2)||D b - z + u||^2.
        auto sub = [&](const Vector& b) { return smooth_val(b) + 0.5 * rho * (d * b - z + u).squaredNorm(); };
        const Vector g = smooth_grad(beta) + rho * (d.transpose() * (d * beta - z + u));
        const Matrix h = smooth_hess(beta) + rho * dtd;
        const Vector dir = -h.llt().solve(g);
        const double f0 = sub(beta), slope = g.dot(dir);
        double step = 1.0;
        Vector cand = beta + dir;
        while (sub(cand) > f0 + 1e-4 * step * slope && step > 1e-10) {
            step *= 0.5;
            cand = beta + step * dir;
        }
        beta = cand;
        if (beta.lpNorm<Eigen::Infinity>() > 1e8) throw numerical_error("logistic fit diverging: data appear separable");

        db = d * beta;
        z_old = z;
        const double thr = cfg.lambda_1 / rho;
        for (Index i = 0; i < m + p; ++i) z(i) = detail::soft_threshold(db(i) + u(i), thr);
        if (ball_u) z.tail(p) = detail::project_l1_ball(z.tail(p), *ball_u);
        u += db - z;

        const double r_norm = (db - z).norm();
        const double s_norm = rho * (d.transpose() * (z - z_old)).norm();
        const double eps_pri = tighten * cfg.tol_primal * (sqrt_mp + std::max(db.norm(), z.norm()));
        const double eps_dual = tighten * cfg.tol_dual * (sqrt_p + rho * (d.transpose() * u).norm());
        res.iterations = it;
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            res.kkt_residual = kkt(beta, u, rho);
            if (res.kkt_residual <= kkt_target || tighten < 1e-4) {
                res.converged = res.kkt_residual <= kkt_target;
                break;
            }
            tighten *= 0.1;
        }
        if (cfg.adapt_rho && it % 10 == 0) {
            if (r_norm > 10.0 * s_norm) {
                rho *= 2.0;
                u /= 2.0;
            } else if (s_norm > 10.0 * r_norm) {
                rho /= 2.0;
                u *= 2.0;
            }
        }
        if (it == cfg.max_iters) res.kkt_residual = kkt(beta, u, rho);
    }
    // Coordinates whose split variable was thresholded to zero are exactly zero.
    for (Index j = 0; j < p; ++j)
        if (z(m + j) == 0.0) beta(j) = 0.0;
    if (cfg.lambda_1 == 0.0 && !ball_u && beta.squaredNorm() > 0.0) {
        // With no l1 term or ball, a direction that classifies every row and
        // costs nothing in the quadratic penalty is a direction of recession.
        const Vector eta = x * beta;
        bool separated = true;
        for (Index i = 0; i < eta.size() && separated; ++i) separated = (2.0 * y01(i) - 1.0) * eta(i) > 0.0;
        const double quad_pen = cfg.lambda_s * (sys.gamma * beta).squaredNorm();
        if (separated && quad_pen <= 1e-12 * beta.squaredNorm())
            throw numerical_error("logistic fit: data are separable and unpenalized; set lambda_1 > 0 or ball_u");
    }
    res.beta = beta;
    res.objective = logistic_objective(beta, x, y01, sys, cfg);
    return res;
}

}  // namespace gtv

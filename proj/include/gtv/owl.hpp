#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gtv/solver.hpp"
#include "gtv/types.hpp"

namespace gtv {

/// OSCAR weights w_i = lambda_1 + lambda_2 (p - i), i = 1..p.
inline Vector oscar_weights(Index p, double lambda_1, double lambda_2) {
    detail::require(lambda_1 >= 0.0 && lambda_2 >= 0.0, "OWL penalties must be >= 0");
    Vector w(p);
    for (Index i = 0; i < p; ++i) w(i) = lambda_1 + lambda_2 * static_cast<double>(p - 1 - i);
    return w;
}

/// sum_i w_i |beta|_[i] with |beta|_[1] >= |beta|_[2] >= ...
inline double owl_norm(const Vector& beta, const Vector& w) {
    detail::require(beta.size() == w.size(), "owl_norm: size mismatch");
    std::vector<double> a(beta.data(), beta.data() + beta.size());
    for (double& v : a) v = std::abs(v);
    std::sort(a.begin(), a.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += w(static_cast<Index>(i)) * a[i];
    return s;
}

/// Exact proximal operator of the OWL norm:
///   argmin_x 0.5 ||x - v||^2 + sum_i w_i |x|_[i].
/// w must be nonincreasing and nonnegative.
inline Vector owl_prox(const Vector& v, const Vector& w) {
    detail::require(v.size() == w.size(), "owl_prox: size mismatch");
    const Index p = v.size();
    for (Index i = 0; i < p; ++i) {
        detail::require(w(i) >= 0.0, "owl_prox: weights must be nonnegative");
        if (i > 0 && w(i) > w(i - 1)) throw invalid_input("owl_prox: weights must be nonincreasing");
    }
    std::vector<Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(v(a)) > std::abs(v(b)); });

    // Pool-adjacent-violators for a nonincreasing fit to |v|_sorted - w.
    struct Block {
        double sum;
        Index len;
    };
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) {
        blocks.push_back({std::abs(v(order[static_cast<std::size_t>(i)])) - w(i), 1});
        while (blocks.size() > 1) {
            const auto& last = blocks.back();
            const auto& prev = blocks[blocks.size() - 2];
            if (prev.sum / static_cast<double>(prev.len) > last.sum / static_cast<double>(last.len)) break;
            Block merged{prev.sum + last.sum, prev.len + last.len};
            blocks.pop_back();
            blocks.back() = merged;
        }
    }
    Vector out(p);
    Index pos = 0;
    for (const auto& b : blocks) {
        const double val = std::max(b.sum / static_cast<double>(b.len), 0.0);
        for (Index k = 0; k < b.len; ++k, ++pos) {
            const Index j = order[static_cast<std::size_t>(pos)];
            out(j) = v(j) >= 0.0 ? val : -val;
        }
    }
    return out;
}

/// OWL regression with OSCAR weights, unnormalized form
///   ||y - X b||^2 + sum_i w_i |b|_[i],   w_i = lambda_1 + lambda_2 (p - i),
/// by FISTA with gradient-based adaptive restart. Convergence is declared
/// when the gradient mapping, divided by n, falls below cfg.tol_dual.
inline FitResult fit_owl(const Matrix& x, const Vector& y, double lambda_1, double lambda_2, const GtvConfig& cfg = {},
                         const Vector* warm = nullptr) {
    detail::require(x.rows() == y.size(), "fit_owl: X rows must match y length");
    detail::require(x.rows() >= 1, "fit_owl: empty data");
    detail::require_finite(x, "X");
    const Index p = x.cols();
    const double n = static_cast<double>(x.rows());
    const Vector w = oscar_weights(p, lambda_1, lambda_2);

    const Matrix xtx = x.transpose() * x;
    const Vector xty = x.transpose() * y;
    const double yty = y.squaredNorm();
    const double lip = 2.0 * std::max(detail::max_eigenvalue(xtx), 1e-12);
    const double step = 1.0 / lip;

    auto grad = [&](const Vector& b) -> Vector { return 2.0 * (xtx * b - xty); };
    auto smooth = [&](const Vector& b) { return std::max(yty - 2.0 * xty.dot(b) + b.dot(xtx * b), 0.0); };

    FitResult res;
    Vector beta = (warm && warm->size() == p) ? *warm : Vector::Zero(p);
    Vector prev = beta, mom = beta;
    double t = 1.0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        prev = beta;
        beta = owl_prox(mom - step * grad(mom), step * w);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if ((mom - beta).dot(beta - prev) > 0.0) {
            t = 1.0;  // restart momentum
            mom = beta;
        } else {
            mom = beta + ((t - 1.0) / t_next) * (beta - prev);
            t = t_next;
        }
        res.iterations = it;
        if (it % 5 == 0 || it == cfg.max_iters) {
            const Vector gmap = lip * (beta - owl_prox(beta - step * grad(beta), step * w));
            res.kkt_residual = gmap.lpNorm<Eigen::Infinity>() / n;
            if (res.kkt_residual <= cfg.tol_dual) {
                res.converged = true;
                break;
            }
        }
    }
    res.beta = beta;
    res.objective = smooth(beta) + owl_norm(beta, w);
    return res;
}

}  // namespace gtv

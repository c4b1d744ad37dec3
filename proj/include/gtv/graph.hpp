#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gtv/covariance.hpp"
#include "gtv/types.hpp"

namespace gtv {

/// Undirected edge j < k carrying the covariance entry w and its sign.
struct Edge {
    Index j = 0;
    Index k = 0;
    double weight = 0.0;
    int sign = 1;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Covariance graph: one edge per unordered pair with a nonzero off-diagonal
/// estimate, sorted lexicographically by (j, k).
struct CovarianceGraph {
    Index p = 0;
    std::vector<Edge> edges;

    Index m() const { return static_cast<Index>(edges.size()); }
};

inline constexpr double kSymmetryTol = 1e-10;

inline CovarianceGraph build_graph(const Matrix& sigma_hat, double eps_edge = 0.0) {
    detail::require_square(sigma_hat, "sigma_hat");
    detail::require_finite(sigma_hat, "sigma_hat");
    detail::require(eps_edge >= 0.0, "eps_edge must be >= 0");
    if (sigma_hat.size() > 0 && detail::max_asymmetry(sigma_hat) > kSymmetryTol)
        throw invalid_input("sigma_hat is not symmetric within 1e-10");

    CovarianceGraph g;
    g.p = sigma_hat.rows();
    for (Index j = 0; j < g.p; ++j)
        for (Index k = j + 1; k < g.p; ++k) {
            const double w = sigma_hat(j, k);
            if (std::abs(w) > eps_edge && w != 0.0) g.edges.push_back({j, k, w, w > 0 ? 1 : -1});
        }
    return g;
}

inline CovarianceGraph build_graph(const CovarianceEstimate& est, double eps_edge = 0.0) {
    return build_graph(est.matrix, eps_edge);
}

/// Incidence matrix Gamma (m x p), Laplacian L = Gamma^T Gamma and the stacked
/// penalty operator [lambda_tv * Gamma; I_p]. Immutable once built.
struct IncidenceSystem {
    SparseMatrix gamma;
    Matrix laplacian;
    SparseMatrix gamma_tilde;
    double lambda_tv = 0.0;

    Index p() const { return gamma.cols(); }
    Index m() const { return gamma.rows(); }
};

namespace detail {

inline IncidenceSystem assemble(SparseMatrix gamma, double lambda_tv) {
    detail::require(lambda_tv >= 0.0 && std::isfinite(lambda_tv), "lambda_tv must be finite and >= 0");
    IncidenceSystem sys;
    const Index m = gamma.rows(), p = gamma.cols();
    sys.lambda_tv = lambda_tv;
    sys.laplacian = Matrix(SparseMatrix(gamma.transpose() * gamma));

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(gamma.nonZeros() + p));
    if (lambda_tv > 0.0) {
        for (Index r = 0; r < m; ++r)
            for (SparseMatrix::InnerIterator it(gamma, r); it; ++it) trip.emplace_back(r, it.col(), lambda_tv * it.value());
    }
    for (Index i = 0; i < p; ++i) trip.emplace_back(m + i, i, 1.0);
    sys.gamma_tilde.resize(m + p, p);
    sys.gamma_tilde.setFromTriplets(trip.begin(), trip.end());
    sys.gamma = std::move(gamma);
    return sys;
}

}  // namespace detail

/// Row l of Gamma is |w|^{1/2} (e_j - sign(w) e_k)^T for the l-th edge.
inline IncidenceSystem incidence(const CovarianceGraph& graph, double lambda_tv) {
    std::vector<Triplet> trip;
    trip.reserve(graph.edges.size() * 2);
    for (std::size_t l = 0; l < graph.edges.size(); ++l) {
        const auto& e = graph.edges[l];
        detail::require(e.j != e.k, "self-loop in covariance graph");
        detail::require(e.j >= 0 && e.k >= 0 && e.j < graph.p && e.k < graph.p, "edge vertex out of range");
        const double s = std::sqrt(std::abs(e.weight));
        trip.emplace_back(static_cast<Index>(l), e.j, s);
        trip.emplace_back(static_cast<Index>(l), e.k, -static_cast<double>(e.sign) * s);
    }
    SparseMatrix gamma(graph.m(), graph.p);
    gamma.setFromTriplets(trip.begin(), trip.end());
    return detail::assemble(std::move(gamma), lambda_tv);
}

/// System whose quadratic penalty is the ridge ||beta||^2 (Gamma = I) and
/// whose stacked operator carries no TV rows. Used for the Elastic Net.
inline IncidenceSystem identity_system(Index p) {
    SparseMatrix eye(p, p);
    eye.setIdentity();
    IncidenceSystem sys = detail::assemble(std::move(eye), 0.0);
    return sys;
}

struct AugmentedProblem {
    Matrix x;  // [X; sqrt(n lambda_s) Gamma]
    Vector y;  // [y; 0]
};

inline AugmentedProblem augment(const Matrix& x, const Vector& y, const IncidenceSystem& sys, double lambda_s) {
    detail::require(x.rows() == y.size(), "augment: X rows must match y length");
    detail::require(x.cols() == sys.p(), "augment: X columns must match graph size");
    detail::require(lambda_s >= 0.0, "lambda_s must be >= 0");
    const Index n = x.rows(), m = sys.m();
    AugmentedProblem out;
    out.x.resize(n + m, x.cols());
    out.x.topRows(n) = x;
    out.x.bottomRows(m) = std::sqrt(static_cast<double>(n) * lambda_s) * Matrix(sys.gamma);
    out.y = Vector::Zero(n + m);
    out.y.head(n) = y;
    return out;
}

/// Connected components with the smallest nonzero Laplacian eigenvalue of each.
struct BlockDecomposition {
    std::vector<std::vector<Index>> components;
    std::vector<std::optional<double>> mu;  // absent for singletons
    std::vector<bool> nonsingular;          // Laplacian block has no zero eigenvalue (mixed signs)

    std::size_t count() const { return components.size(); }
    Index size(std::size_t k) const { return static_cast<Index>(components[k].size()); }
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(Index n) : parent_(static_cast<std::size_t>(n)) {
        std::iota(parent_.begin(), parent_.end(), Index{0});
    }
    Index find(Index x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            auto& px = parent_[static_cast<std::size_t>(x)];
            px = parent_[static_cast<std::size_t>(px)];
            x = px;
        }
        return x;
    }
    void unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[static_cast<std::size_t>(b)] = a;
    }

private:
    std::vector<Index> parent_;
};

}  // namespace detail

inline constexpr double kNonzeroEigTol = 1e-9;

inline BlockDecomposition components(const CovarianceGraph& graph) {
    detail::UnionFind uf(graph.p);
    for (const auto& e : graph.edges) uf.unite(e.j, e.k);

    BlockDecomposition out;
    std::vector<Index> slot(static_cast<std::size_t>(graph.p), -1);
    for (Index v = 0; v < graph.p; ++v) {
        const Index root = uf.find(v);
        auto& s = slot[static_cast<std::size_t>(root)];
        if (s < 0) {
            s = static_cast<Index>(out.components.size());
            out.components.emplace_back();
        }
        out.components[static_cast<std::size_t>(s)].push_back(v);
    }

    const Matrix lap = incidence(graph, 0.0).laplacian;
    for (const auto& comp : out.components) {
        const Index sz = static_cast<Index>(comp.size());
        if (sz < 2) {
            out.mu.emplace_back(std::nullopt);
            out.nonsingular.push_back(false);
            continue;
        }
        Matrix block(sz, sz);
        for (Index a = 0; a < sz; ++a)
            for (Index b = 0; b < sz; ++b) block(a, b) = lap(comp[static_cast<std::size_t>(a)], comp[static_cast<std::size_t>(b)]);
        Eigen::SelfAdjointEigenSolver<Matrix> es(block, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw numerical_error("Laplacian block eigensolve failed");
        const Vector ev = es.eigenvalues();
        const double tol = kNonzeroEigTol * std::max(ev(sz - 1), std::numeric_limits<double>::min());
        std::optional<double> mu;
        for (Index i = 0; i < sz; ++i)
            if (ev(i) > tol) {
                mu = ev(i);
                break;
            }
        out.mu.push_back(mu);
        out.nonsingular.push_back(ev(0) > tol);
    }
    return out;
}

inline constexpr Index kDenseSpectralLimit = 2000;

/// Maximum column l2 norm of the pseudoinverse of the stacked operator.
inline double rho_exact(const IncidenceSystem& sys) {
    const Index p = sys.p();
    if (p > kDenseSpectralLimit) throw invalid_input("rho_exact: p exceeds dense limit of 2000");
    if (p == 0) return 0.0;
    // Gamma_tilde contains I_p, so it has full column rank and
    // pinv = (I + lambda_tv^2 L)^{-1} Gamma_tilde^T with a well-conditioned factor.
    const Matrix gram = Matrix::Identity(p, p) + sys.lambda_tv * sys.lambda_tv * sys.laplacian;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw numerical_error("rho_exact: Gram matrix factorization failed");
    const Matrix pinv = llt.solve(Matrix(sys.gamma_tilde.transpose()));
    return std::sqrt(pinv.colwise().squaredNorm().maxCoeff());
}

/// sqrt(max_k {1/|B_k| + 2/(1 + mu_k lambda_tv^2)}); singleton components use mu = 0.
inline double rho_bound(const BlockDecomposition& decomp, double lambda_tv) {
    detail::require(lambda_tv >= 0.0, "lambda_tv must be >= 0");
    double worst = 0.0;
    for (std::size_t k = 0; k < decomp.count(); ++k) {
        const double mu = decomp.mu[k].value_or(0.0);
        const double term = 1.0 / static_cast<double>(decomp.size(k)) + 2.0 / (1.0 + mu * lambda_tv * lambda_tv);
        worst = std::max(worst, term);
    }
    return std::sqrt(worst);
}

/// Upper bound on 1/k_T for T = T1 (edge rows) u T2 (coordinate rows).
inline double kt_inv_bound(Index t1, Index t2, double sigma_l11, double lambda_tv) {
    detail::require(t1 >= 0 && t2 >= 0, "support sizes must be >= 0");
    if (t1 + t2 == 0) throw invalid_input("kt_inv_bound: T must be non-empty");
    detail::require(sigma_l11 >= 0.0 && lambda_tv >= 0.0, "sigma_l11 and lambda_tv must be >= 0");
    const double a = static_cast<double>(t1), b = static_cast<double>(t2);
    return (lambda_tv * std::sqrt(2.0 * sigma_l11 * a) + std::sqrt(b)) / std::sqrt(a + b);
}

struct MinEigReport {
    double exact = 0.0;         // lambda_min(Sigma + lambda_s L)
    double lower_bound = 0.0;  // (1 - lambda_s) lambda_min(Sigma) + lambda_s c_l / 2
    double sigma_min = 0.0;     // lambda_min(Sigma)
    double c_l = 0.0;

    double gap() const { return exact - lower_bound; }
};

/// `c_l` defaults to the minimum absolute row sum of sigma (diagonal included).
inline MinEigReport min_eig(const Matrix& sigma, const Matrix& laplacian, double lambda_s,
                            std::optional<double> c_l = {}) {
    detail::require_square(sigma, "sigma");
    detail::require(laplacian.rows() == sigma.rows() && laplacian.cols() == sigma.cols(),
                    "min_eig: sigma and laplacian sizes differ");
    detail::require(lambda_s >= 0.0 && lambda_s <= 1.0, "min_eig: lambda_s must lie in [0, 1]");
    if (sigma.size() > 0 && detail::max_asymmetry(sigma) > kSymmetryTol) throw invalid_input("sigma is not symmetric");
    if (laplacian.size() > 0 && detail::max_asymmetry(laplacian) > kSymmetryTol)
        throw invalid_input("laplacian is not symmetric");

    MinEigReport r;
    r.c_l = c_l ? *c_l : sigma.cwiseAbs().rowwise().sum().minCoeff();
    r.sigma_min = detail::min_eigenvalue(sigma);
    r.exact = detail::min_eigenvalue(sigma + lambda_s * laplacian);
    r.lower_bound = (1.0 - lambda_s) * r.sigma_min + lambda_s * r.c_l / 2.0;
    return r;
}

}  // namespace gtv

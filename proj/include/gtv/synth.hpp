#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gtv/covariance.hpp"
#include "gtv/random.hpp"
#include "gtv/types.hpp"

namespace gtv {

enum class Family { block, chain, lattice };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::block: return "block";
        case Family::chain: return "chain";
        case Family::lattice: return "lattice";
    }
    return "unknown";
}

inline Family family_from_string(const std::string& s) {
    if (s == "block") return Family::block;
    if (s == "chain") return Family::chain;
    if (s == "lattice") return Family::lattice;
    throw invalid_input("unknown family '" + s + "' (expected block, chain or lattice)");
}

enum class Misalignment { none, within_block_sd, split_blocks };

struct Scenario {
    Family family = Family::block;
    Index p = 40;
    Index K = 10;  // block count; ignored for chain and lattice
    double r = 0.8;
    Index n = 60;
    double sigma_noise = 0.01;
    Index s = 12;
    double beta_noise_sd = 0.01;
    Misalignment misalignment = Misalignment::none;
    double within_block_sd = 0.0;  // used when misalignment == within_block_sd
    Index split_count = 1;         // used when misalignment == split_blocks
    std::uint64_t seed = 0;
    bool fix_support = false;  // keep the active blocks fixed across trials

    // Connected components of the population graph.
    Index blocks() const { return family == Family::block ? K : 1; }

    void validate() const;
};

namespace detail {

inline Index exact_sqrt(Index v) {
    if (v < 0) return -1;
    Index r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v))));
    return r * r == v ? r : -1;
}

}  // namespace detail

inline void Scenario::validate() const {
    detail::require(p >= 1, "scenario: p must be >= 1");
    detail::require(n >= 1, "scenario: n must be >= 1");
    detail::require(sigma_noise >= 0.0 && std::isfinite(sigma_noise), "scenario: sigma_noise must be >= 0");
    detail::require(beta_noise_sd >= 0.0 && std::isfinite(beta_noise_sd), "scenario: beta_noise_sd must be >= 0");
    detail::require(s >= 0 && s <= p, "scenario: s must lie in [0, p]");
    switch (family) {
        case Family::block:
            detail::require(K >= 1 && K <= p && p % K == 0, "block family: K must divide p");
            detail::require(r > 0.0 && r <= 1.0, "block family: r must lie in (0, 1]");
            break;
        case Family::chain:
            detail::require(r > 0.0 && r < 0.5, "chain family: r must lie in (0, 1/2)");
            break;
        case Family::lattice:
            detail::require(detail::exact_sqrt(p) > 0, "lattice family: p must be a perfect square");
            detail::require(r > 0.0 && r < 0.25, "lattice family: r must lie in (0, 1/4)");
            break;
    }
    if (misalignment == Misalignment::within_block_sd)
        detail::require(within_block_sd >= 0.0 && std::isfinite(within_block_sd), "within_block_sd must be >= 0");
    if (misalignment == Misalignment::split_blocks) {
        detail::require(family == Family::chain, "split_blocks misalignment applies to the chain family only");
        detail::require(split_count >= 1, "split_blocks count must be >= 1");
    }
}

/// Population covariance of the scenario's family.
inline CovarianceEstimate make_covariance(const Scenario& sc) {
    sc.validate();
    const Index p = sc.p;
    Matrix sigma = Matrix::Zero(p, p);
    switch (sc.family) {
        case Family::block: {
            const Index b = p / sc.K;
            const double a = static_cast<double>(sc.K) / static_cast<double>(p);
            for (Index k = 0; k < sc.K; ++k) {
                sigma.block(k * b, k * b, b, b).setConstant(a * sc.r);
                sigma.block(k * b, k * b, b, b).diagonal().setConstant(a);
            }
            break;
        }
        case Family::chain:
            sigma.diagonal().setOnes();
            for (Index j = 0; j + 1 < p; ++j) sigma(j, j + 1) = sigma(j + 1, j) = sc.r;
            break;
        case Family::lattice: {
            const Index side = detail::exact_sqrt(p);
            sigma.diagonal().setOnes();
            // 1-based rule: |j-k| = 1 within a row, or |j-k| = side.
            for (Index j = 0; j < p; ++j) {
                if ((j + 1) % side != 0 && j + 1 < p) sigma(j, j + 1) = sigma(j + 1, j) = sc.r;
                if (j + side < p) sigma(j, j + side) = sigma(j + side, j) = sc.r;
            }
            break;
        }
    }
    CovarianceEstimate out;
    out.matrix = std::move(sigma);
    out.source = CovarianceSource::population;
    return out;
}

struct BetaDraw {
    Vector beta;
    std::vector<std::vector<Index>> active_groups;  // index sets of active blocks / runs / sublattice
};

/// Active coefficients ~ N(1, sd^2), the rest exactly 0.
///   block:   s / (p/K) blocks chosen at random without replacement
///   chain:   prefix 1..s, or `split_count` separated runs spread over the chain
///   lattice: top-left sqrt(s) x sqrt(s) sublattice
/// `support_seed` overrides the seed of the block choice (used for fixed supports).
inline BetaDraw make_beta(const Scenario& sc, std::optional<std::uint64_t> support_seed = std::nullopt) {
    sc.validate();
    const Index p = sc.p, s = sc.s;
    BetaDraw out;
    switch (sc.family) {
        case Family::block: {
            const Index b = p / sc.K;
            if (s % b != 0)
                throw invalid_input("block family: s = " + std::to_string(s) + " is not a multiple of the block size " +
                                    std::to_string(b));
            Rng pick(support_seed ? *support_seed : child_seed(sc.seed, 0x5eed));
            auto order = shuffled_indices(sc.K, pick);
            order.resize(static_cast<std::size_t>(s / b));
            std::sort(order.begin(), order.end());
            for (Index k : order) {
                std::vector<Index> g(static_cast<std::size_t>(b));
                for (Index i = 0; i < b; ++i) g[static_cast<std::size_t>(i)] = k * b + i;
                out.active_groups.push_back(std::move(g));
            }
            break;
        }
        case Family::chain: {
            if (sc.misalignment != Misalignment::split_blocks) {
                std::vector<Index> g(static_cast<std::size_t>(s));
                for (Index i = 0; i < s; ++i) g[static_cast<std::size_t>(i)] = i;
                if (s > 0) out.active_groups.push_back(std::move(g));
                break;
            }
            const Index c = sc.split_count;
            if (s < c) throw invalid_input("split_blocks: need at least one active node per run");
            if (s + c + 1 > p) throw invalid_input("split_blocks: runs do not fit in the chain with gaps");
            // Run lengths differ by at most one; each run sits in the middle of
            // its own segment so neighbouring runs never touch the chain ends
            // or each other.
            for (Index i = 0; i < c; ++i) {
                const Index len = s / c + (i < s % c ? 1 : 0);
                const Index seg_lo = i * p / c, seg_hi = (i + 1) * p / c;
                if (seg_hi - seg_lo < len + 2) throw invalid_input("split_blocks: runs do not fit in the chain with gaps");
                const Index start = seg_lo + (seg_hi - seg_lo - len) / 2;
                std::vector<Index> g(static_cast<std::size_t>(len));
                for (Index k = 0; k < len; ++k) g[static_cast<std::size_t>(k)] = start + k;
                out.active_groups.push_back(std::move(g));
            }
            break;
        }
        case Family::lattice: {
            const Index side = detail::exact_sqrt(p), w = detail::exact_sqrt(s);
            if (w < 0) throw invalid_input("lattice family: s must be a perfect square");
            std::vector<Index> g;
            for (Index a = 0; a < w; ++a)
                for (Index c = 0; c < w; ++c) g.push_back(a * side + c);
            if (!g.empty()) out.active_groups.push_back(std::move(g));
            break;
        }
    }
    const double sd = sc.misalignment == Misalignment::within_block_sd ? sc.within_block_sd : sc.beta_noise_sd;
    Rng rng(child_seed(sc.seed, 0xbe7a));
    std::normal_distribution<double> nd(0.0, 1.0);
    out.beta = Vector::Zero(p);
    for (const auto& g : out.active_groups)
        for (Index j : g) out.beta(j) = sd > 0.0 ? 1.0 + sd * nd(rng) : 1.0;
    return out;
}

/// Symmetric square root of a PSD matrix. Eigenvalues in [-1e-10, 0) are
/// clipped to 0; anything more negative is an error.
inline Matrix psd_sqrt(const Matrix& sigma) {
    detail::require_square(sigma, "Sigma");
    detail::require_finite(sigma, "Sigma");
    if (sigma.size() == 0) return sigma;
    if (detail::max_asymmetry(sigma) > 1e-10) throw invalid_input("Sigma is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    if (es.info() != Eigen::Success) throw numerical_error("Sigma eigendecomposition failed");
    Vector ev = es.eigenvalues();
    if (ev(0) < -1e-10)
        throw invalid_input("Sigma is indefinite (smallest eigenvalue " + std::to_string(ev(0)) + ")");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct Dataset {
    Matrix x;
    Vector y;
};

/// Rows of X i.i.d. N(0, Sigma), y = X beta* + sigma_noise * eps.
inline Dataset sample_data(const Matrix& sigma, const Vector& beta_star, Index n, double sigma_noise,
                           std::uint64_t seed) {
    detail::require(beta_star.size() == sigma.rows(), "sample_data: beta* length must match Sigma");
    detail::require(n >= 0, "sample_data: n must be >= 0");
    detail::require(sigma_noise >= 0.0, "sample_data: sigma_noise must be >= 0");
    const Matrix root = psd_sqrt(sigma);
    Rng rng(seed);
    Dataset d;
    d.x = standard_normal(n, sigma.rows(), rng) * root;
    const Matrix eps = standard_normal(n, 1, rng);
    d.y = d.x * beta_star + sigma_noise * eps.col(0);
    return d;
}

/// m independent rows from N(0, Sigma), used as side information.
inline Matrix sample_sideinfo(const Matrix& sigma, Index m = 1000, std::uint64_t seed = 0) {
    detail::require(m >= 0, "sample_sideinfo: m must be >= 0");
    const Matrix root = psd_sqrt(sigma);
    if (m == 0) return Matrix(0, sigma.rows());
    Rng rng(seed);
    return standard_normal(m, sigma.rows(), rng) * root;
}

}  // namespace gtv

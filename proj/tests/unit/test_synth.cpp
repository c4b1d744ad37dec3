#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <tuple>

#include "gtv/graph.hpp"
#include "gtv/solver.hpp"
#include "gtv/synth.hpp"
#include "gtv/theory.hpp"

using namespace gtv;

namespace {

Scenario block(Index p, Index K, double r, Index s = 0) {
    Scenario sc;
    sc.family = Family::block;
    sc.p = p;
    sc.K = K;
    sc.r = r;
    sc.s = s;
    return sc;
}

Scenario chain(Index p, double r, Index s = 0) {
    Scenario sc;
    sc.family = Family::chain;
    sc.p = p;
    sc.r = r;
    sc.s = s;
    return sc;
}

Scenario lattice(Index p, double r, Index s = 0) {
    Scenario sc;
    sc.family = Family::lattice;
    sc.p = p;
    sc.r = r;
    sc.s = s;
    return sc;
}

}  // namespace

TEST(MakeCovariance, Examples) {
    Matrix b(4, 4);
    b << 0.5, 0.4, 0, 0, 0.4, 0.5, 0, 0, 0, 0, 0.5, 0.4, 0, 0, 0.4, 0.5;
    EXPECT_LT((make_covariance(block(4, 2, 0.8)).matrix - b).cwiseAbs().maxCoeff(), 1e-15);

    Matrix c(3, 3);
    c << 1, .4, 0, .4, 1, .4, 0, .4, 1;
    EXPECT_LT((make_covariance(chain(3, 0.4)).matrix - c).cwiseAbs().maxCoeff(), 1e-15);

    const auto g = build_graph(make_covariance(lattice(4, 0.2)));
    ASSERT_EQ(g.m(), 4);
    const std::vector<std::pair<Index, Index>> want{{0, 1}, {0, 2}, {1, 3}, {2, 3}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(std::pair(g.edges[i].j, g.edges[i].k), want[i]);
        EXPECT_DOUBLE_EQ(g.edges[i].weight, 0.2);
    }
    EXPECT_EQ(make_covariance(chain(3, 0.4)).source, CovarianceSource::population);
}

TEST(MakeCovariance, LatticeHasNoWrapAround) {
    const Matrix s = make_covariance(lattice(9, 0.1)).matrix;
    EXPECT_EQ(s(2, 3), 0.0);
    EXPECT_EQ(s(5, 6), 0.0);
    EXPECT_EQ(s(0, 3), 0.1);
    EXPECT_EQ(build_graph(s).m(), 12);
}

TEST(MakeCovariance, InvalidParameters) {
    EXPECT_THROW(make_covariance(block(10, 3, 0.5)), invalid_input);
    EXPECT_THROW(make_covariance(block(10, 2, 1.5)), invalid_input);
    EXPECT_THROW(make_covariance(block(10, 2, 0.0)), invalid_input);
    EXPECT_THROW(make_covariance(chain(10, 0.5)), invalid_input);
    EXPECT_THROW(make_covariance(lattice(10, 0.1)), invalid_input);
    EXPECT_THROW(make_covariance(lattice(9, 0.25)), invalid_input);
    EXPECT_THROW(make_covariance(chain(10, 0.2, 11)), invalid_input);
    EXPECT_THROW(family_from_string("ring"), invalid_input);
    EXPECT_EQ(family_from_string("lattice"), Family::lattice);
}

TEST(MakeCovariance, AssumptionConstantsPerFamily) {
    for (auto [p, K, r] : {std::tuple{40, 10, 0.8}, std::tuple{12, 3, 0.5}, std::tuple{20, 20, 1.0}}) {
        const Matrix s = make_covariance(block(p, K, r)).matrix;
        const double a = static_cast<double>(K) / p;
        const Vector rows = s.cwiseAbs().rowwise().sum();
        EXPECT_NEAR(rows.minCoeff(), a * (1 + r * (static_cast<double>(p) / K - 1)), 1e-12);
        EXPECT_NEAR(rows.maxCoeff(), rows.minCoeff(), 1e-12);
        EXPECT_GT(assumption_inputs_from(s).c_l, 0.0);
    }
    const Vector cr = make_covariance(chain(10, 0.3)).matrix.cwiseAbs().rowwise().sum();
    for (Index j = 1; j < 9; ++j) EXPECT_NEAR(cr(j), 1.6, 1e-12);
    const Matrix ls = make_covariance(lattice(25, 0.2)).matrix;
    const Vector lr = ls.cwiseAbs().rowwise().sum();
    EXPECT_NEAR(lr(12), 1.8, 1e-12);  // interior node of the 5x5 lattice
    const auto in = assumption_inputs_from(ls);
    EXPECT_NEAR(in.c_u, detail::max_eigenvalue(ls), 1e-12);
    EXPECT_NEAR(in.c_l, lr.minCoeff(), 1e-12);
}

TEST(MakeCovariance, BlockSpectrum) {
    for (auto [p, K, r] : {std::tuple{40, 10, 0.8}, std::tuple{12, 4, 0.3}}) {
        const Matrix s = make_covariance(block(p, K, r)).matrix;
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        const double a = static_cast<double>(K) / p;
        const double lo = a * (1 - r), hi = a * (1 - r) + a * r * p / K;
        int n_lo = 0, n_hi = 0;
        for (Index i = 0; i < p; ++i) {
            const double e = es.eigenvalues()(i);
            if (std::abs(e - lo) < 1e-10) ++n_lo;
            else if (std::abs(e - hi) < 1e-10) ++n_hi;
        }
        EXPECT_EQ(n_lo, p - K);
        EXPECT_EQ(n_hi, K);
    }
}

TEST(MakeBeta, ExactOnesWithoutNoise) {
    auto sc = block(40, 10, 0.8, 12);
    sc.beta_noise_sd = 0.0;
    const auto d = make_beta(sc);
    EXPECT_EQ(support_of(d.beta, 0.0).size(), 12u);
    for (Index j = 0; j < 40; ++j) EXPECT_TRUE(d.beta(j) == 0.0 || d.beta(j) == 1.0);
    EXPECT_EQ(d.active_groups.size(), 3u);
}

TEST(MakeBeta, SupportSizeExact) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto b = block(40, 10, 0.8, 12);
        b.seed = seed;
        EXPECT_EQ(support_of(make_beta(b).beta, 0.0).size(), 12u);
        auto c = chain(30, 0.3, 7);
        c.seed = seed;
        EXPECT_EQ(support_of(make_beta(c).beta, 0.0).size(), 7u);
        auto l = lattice(25, 0.2, 9);
        l.seed = seed;
        const auto lb = make_beta(l);
        EXPECT_EQ(support_of(lb.beta, 0.0).size(), 9u);
        EXPECT_EQ(lb.active_groups[0], (std::vector<Index>{0, 1, 2, 5, 6, 7, 10, 11, 12}));
    }
}

TEST(MakeBeta, ActiveBlocksAreWholeBlocksAndSeeded) {
    auto sc = block(40, 10, 0.8, 12);
    sc.seed = 5;
    const auto a = make_beta(sc);
    for (const auto& g : a.active_groups) {
        ASSERT_EQ(g.size(), 4u);
        EXPECT_EQ(g[0] % 4, 0);
    }
    EXPECT_EQ(make_beta(sc).beta, a.beta);
    bool differs = false;
    for (std::uint64_t s = 6; s < 16 && !differs; ++s) {
        sc.seed = s;
        differs = make_beta(sc).active_groups != a.active_groups;
    }
    EXPECT_TRUE(differs);
    sc.seed = 99;
    const auto f1 = make_beta(sc, 1234);
    sc.seed = 100;
    EXPECT_EQ(make_beta(sc, 1234).active_groups, f1.active_groups);
    EXPECT_THROW(make_beta(block(40, 10, 0.8, 6)), invalid_input);
}

TEST(MakeBeta, ChainSplitBoundaryEdges) {
    for (auto [c, want] : {std::pair{1, 2}, std::pair{2, 4}, std::pair{4, 8}}) {
        auto sc = chain(40, 0.3, 4);
        sc.beta_noise_sd = 0.0;
        sc.misalignment = Misalignment::split_blocks;
        sc.split_count = c;
        const auto d = make_beta(sc);
        const auto sys = incidence(build_graph(make_covariance(sc)), 1.0);
        EXPECT_EQ(gamma_l0(sys, d.beta), want) << "split " << c;
        EXPECT_EQ(static_cast<int>(d.active_groups.size()), c);
    }
    auto prefix = chain(40, 0.3, 4);
    prefix.beta_noise_sd = 0.0;
    EXPECT_EQ(gamma_l0(incidence(build_graph(make_covariance(prefix)), 1.0), make_beta(prefix).beta), 1);

    auto bad = chain(10, 0.3, 8);
    bad.misalignment = Misalignment::split_blocks;
    bad.split_count = 4;
    EXPECT_THROW(make_beta(bad), invalid_input);
    auto lat = lattice(16, 0.2, 5);
    EXPECT_THROW(make_beta(lat), invalid_input);
    auto blk = block(40, 10, 0.8, 12);
    blk.misalignment = Misalignment::split_blocks;
    EXPECT_THROW(make_beta(blk), invalid_input);
}

TEST(MakeBeta, WithinBlockSdControlsSpread) {
    auto sc = block(40, 10, 0.8, 12);
    sc.misalignment = Misalignment::within_block_sd;
    sc.within_block_sd = 0.5;
    const auto d = make_beta(sc);
    double var = 0.0;
    for (const auto& g : d.active_groups)
        for (Index j : g) var += (d.beta(j) - 1.0) * (d.beta(j) - 1.0);
    EXPECT_GT(std::sqrt(var / 12.0), 0.1);
}

TEST(MakeBeta, GammaL1GrowsLinearlyInNoiseSd) {
    // Block p=40, K=10, r=0.8: 3 active blocks of 4, 18 edges of weight a r = 0.2.
    // E|b_j - b_k| = 2 sd / sqrt(pi) per edge.
    const std::vector<double> sds{0.0, 0.05, 0.1, 0.2, 0.4};
    std::vector<double> means;
    for (double sd : sds) {
        double acc = 0.0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            auto sc = block(40, 10, 0.8, 12);
            sc.beta_noise_sd = sd;
            sc.seed = seed;
            const auto sys = incidence(build_graph(make_covariance(sc)), 1.0);
            acc += gamma_l1(sys, make_beta(sc).beta);
        }
        means.push_back(acc / 200.0);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < sds.size(); ++i) {
        sx += sds[i];
        sy += means[i];
        sxx += sds[i] * sds[i];
        sxy += sds[i] * means[i];
    }
    const double k = static_cast<double>(sds.size());
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    const double expected = 18.0 * std::sqrt(0.2) * 2.0 / std::sqrt(std::numbers::pi);
    EXPECT_NEAR(slope, expected, 0.05 * expected);
    EXPECT_EQ(means[0], 0.0);
}

TEST(SampleData, NoiselessAndDeterministic) {
    const Matrix sigma = make_covariance(chain(5, 0.3)).matrix;
    const Vector beta = Vector::LinSpaced(5, -1, 1);
    const auto a = sample_data(sigma, beta, 20, 0.0, 7);
    EXPECT_LT((a.y - a.x * beta).cwiseAbs().maxCoeff(), 1e-14);
    const auto b = sample_data(sigma, beta, 20, 0.3, 7);
    const auto c = sample_data(sigma, beta, 20, 0.3, 7);
    EXPECT_EQ(b.x, c.x);
    EXPECT_EQ(b.y, c.y);
    EXPECT_EQ(b.x, a.x);
    EXPECT_NE(sample_data(sigma, beta, 20, 0.3, 8).x, b.x);
}

TEST(SampleData, IdentityCovarianceMonteCarlo) {
    const Index n = 10000;
    const auto d = sample_data(Matrix::Identity(4, 4), Vector::Zero(4), n, 0.0, 11);
    const Matrix s = d.x.transpose() * d.x / static_cast<double>(n);
    EXPECT_LT((s - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(SampleData, Errors) {
    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    EXPECT_THROW(sample_data(indefinite, Vector::Zero(2), 5, 0.1, 1), invalid_input);
    EXPECT_THROW(sample_data(Matrix::Identity(2, 2), Vector::Zero(3), 5, 0.1, 1), invalid_input);
    Matrix tiny = Matrix::Identity(2, 2);
    tiny(1, 1) = -1e-12;
    EXPECT_NO_THROW(sample_data(tiny, Vector::Zero(2), 5, 0.1, 1));
}

TEST(PsdSqrt, Squares) {
    const Matrix s = make_covariance(lattice(16, 0.24)).matrix;
    const Matrix r = psd_sqrt(s);
    EXPECT_LT((r * r - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleSideinfo, ShapeAndDeterminism) {
    const Matrix sigma = make_covariance(block(40, 10, 0.8)).matrix;
    EXPECT_EQ(sample_sideinfo(sigma, 0, 1).rows(), 0);
    EXPECT_EQ(sample_sideinfo(sigma, 0, 1).cols(), 40);
    const Matrix a = sample_sideinfo(sigma, 1000, 3);
    EXPECT_EQ(a.rows(), 1000);
    EXPECT_EQ(a, sample_sideinfo(sigma, 1000, 3));
}

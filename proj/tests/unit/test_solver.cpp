#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gtv/solver.hpp"
#include "gtv/synth.hpp"
#include "oracles.hpp"

using namespace gtv;

namespace {

struct Problem {
    Matrix x;
    Vector y;
};

Problem make_problem(Index n, Index p, std::uint64_t seed, Index active = 4) {
    Rng rng(seed);
    Problem pr;
    pr.x = standard_normal(n, p, rng);
    Vector b = Vector::Zero(p);
    for (Index j = 0; j < std::min(active, p); ++j) b(j) = (j % 2 ? -1.0 : 1.0) * (1.0 + 0.5 * j);
    pr.y = pr.x * b + 0.1 * standard_normal(n, 1, rng).col(0);
    return pr;
}

CovarianceGraph chain_graph(Index p, double w) {
    CovarianceGraph g;
    g.p = p;
    for (Index j = 0; j + 1 < p; ++j) g.edges.push_back({j, j + 1, w, w > 0 ? 1 : -1});
    return g;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Objective, Examples) {
    const auto pr = make_problem(7, 3, 1);
    const auto sys = incidence(chain_graph(3, 0.4), 1.0);
    GtvConfig cfg;
    cfg.lambda_1 = 0.3;
    cfg.lambda_tv = 1.0;
    cfg.lambda_s = 0.2;
    EXPECT_NEAR(objective(Vector::Zero(3), pr.x, pr.y, sys, cfg), pr.y.squaredNorm() / 7.0, 1e-14);

    CovarianceGraph empty;
    empty.p = 3;
    const Vector b = Vector::LinSpaced(3, -1.0, 2.0);
    const double want = (pr.y - pr.x * b).squaredNorm() / 7.0 + 0.3 * b.lpNorm<1>();
    EXPECT_NEAR(objective(b, pr.x, pr.y, incidence(empty, 1.0), cfg), want, 1e-13);

    CovarianceGraph unit;
    unit.p = 2;
    unit.edges.push_back({0, 1, 1.0, 1});
    GtvConfig ones;
    ones.lambda_1 = ones.lambda_tv = ones.lambda_s = 1.0;
    Vector b2(2);
    b2 << 1, -1;
    EXPECT_NEAR(objective(b2, Matrix::Zero(1, 2), Vector::Zero(1), incidence(unit, 1.0), ones), 8.0, 1e-14);

    EXPECT_THROW(objective(Vector::Zero(2), pr.x, pr.y, sys, cfg), invalid_input);
}

TEST(Config, Validation) {
    const auto pr = make_problem(10, 3, 2);
    const auto sys = incidence(chain_graph(3, 0.5), 0.0);
    GtvConfig bad;
    bad.lambda_1 = -1.0;
    EXPECT_THROW(fit_gtv(pr.x, pr.y, sys, bad), invalid_input);
    GtvConfig tol;
    tol.tol_primal = 0.0;
    EXPECT_THROW(fit_gtv(pr.x, pr.y, sys, tol), invalid_input);
    GtvConfig rho;
    rho.admm_rho = 0.0;
    EXPECT_THROW(fit_gtv(pr.x, pr.y, sys, rho), invalid_input);
    EXPECT_THROW(fit_gtv(pr.x, Vector::Zero(9), sys, GtvConfig{}), invalid_input);
    EXPECT_THROW(fit_gtv(pr.x, pr.y, incidence(chain_graph(4, 0.5), 0.0), GtvConfig{}), invalid_input);
}

TEST(FitGtv, LargeLambdaGivesZero) {
    const auto pr = make_problem(30, 6, 3);
    const auto sys = incidence(chain_graph(6, 0.3), 1.0);
    GtvConfig cfg;
    cfg.lambda_1 = 2.0 * (pr.x.transpose() * pr.y / 30.0).lpNorm<Eigen::Infinity>();
    cfg.lambda_tv = 1.0;
    cfg.lambda_s = 0.5;
    const auto r = fit_gtv(pr.x, pr.y, sys, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.beta, Vector::Zero(6));
    EXPECT_NEAR(r.objective, pr.y.squaredNorm() / 30.0, 1e-12);
    cfg.lambda_1 *= 10.0;
    EXPECT_EQ(fit_gtv(pr.x, pr.y, sys, cfg).beta, Vector::Zero(6));
}

TEST(FitGtv, RidgeLimitMatchesClosedForm) {
    for (double ltv : {0.0, 1.0, 5.0}) {
        const auto pr = make_problem(50, 10, 4);
        const auto sys = incidence(chain_graph(10, 0.6), ltv);
        GtvConfig cfg;
        cfg.lambda_1 = 0.0;
        cfg.lambda_tv = ltv;
        cfg.lambda_s = 0.3;
        const auto r = fit_gtv(pr.x, pr.y, sys, cfg);
        const Matrix a = pr.x.transpose() * pr.x / 50.0 + 0.3 * sys.laplacian;
        const Vector closed = a.ldlt().solve(pr.x.transpose() * pr.y / 50.0);
        EXPECT_TRUE(r.converged);
        EXPECT_LT((r.beta - closed).lpNorm<Eigen::Infinity>(), 1e-6);
        EXPECT_LT(rel_gap(r.objective, objective(closed, pr.x, pr.y, sys, cfg)), 1e-6);
    }
}

TEST(FitGtv, SmallLambdaApproachesRidge) {
    const auto pr = make_problem(50, 8, 5);
    const auto sys = incidence(chain_graph(8, 0.5), 1.0);
    GtvConfig cfg;
    cfg.lambda_1 = 1e-9;
    cfg.lambda_tv = 1.0;
    cfg.lambda_s = 0.4;
    const auto r = fit_gtv(pr.x, pr.y, sys, cfg);
    const Matrix a = pr.x.transpose() * pr.x / 50.0 + 0.4 * sys.laplacian;
    const Vector closed = a.ldlt().solve(pr.x.transpose() * pr.y / 50.0);
    EXPECT_LT(rel_gap(r.objective, objective(closed, pr.x, pr.y, sys, cfg)), 1e-6);
}

TEST(FitGtv, LassoMatchesCoordinateDescent) {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto pr = make_problem(50, 20, seed, 5);
        const double lmax = 2.0 * (pr.x.transpose() * pr.y / 50.0).lpNorm<Eigen::Infinity>();
        for (double frac : {0.02, 0.2}) {
            const double lam = frac * lmax;
            const Vector cd = oracle::lasso_cd(pr.x, pr.y, lam);
            const double want = oracle::lasso_objective(pr.x, pr.y, cd, lam);
            const auto r = fit_lasso(pr.x, pr.y, lam);
            EXPECT_TRUE(r.converged) << "seed " << seed;
            EXPECT_LT(rel_gap(oracle::lasso_objective(pr.x, pr.y, r.beta, lam), want), 1e-6) << "seed " << seed;
            EXPECT_LT(rel_gap(r.objective, want), 1e-6);
        }
    }
}

TEST(FitGtv, GtvWithoutGraphTermsIsLasso) {
    const auto pr = make_problem(40, 12, 7);
    const auto sys = incidence(chain_graph(12, 0.5), 3.0);
    GtvConfig cfg;
    cfg.lambda_1 = 0.1;
    cfg.lambda_tv = 0.0;
    cfg.lambda_s = 0.0;
    const auto r = fit_gtv(pr.x, pr.y, sys, cfg);
    const double want = oracle::lasso_objective(pr.x, pr.y, oracle::lasso_cd(pr.x, pr.y, 0.1), 0.1);
    EXPECT_LT(rel_gap(r.objective, want), 1e-6);
}

TEST(FitGtv, IdenticalColumnsJoinedByEdgeAreEqual) {
    Rng rng(8);
    Matrix x = standard_normal(40, 3, rng);
    x.col(1) = x.col(0);
    const Vector y = x.col(0) * 2.0 - x.col(2) + 0.1 * standard_normal(40, 1, rng).col(0);
    CovarianceGraph g;
    g.p = 3;
    g.edges.push_back({0, 1, 1.0, 1});
    const auto sys = incidence(g, 10.0);
    GtvConfig cfg;
    cfg.lambda_1 = 0.05;
    cfg.lambda_tv = 10.0;
    const auto r = fit_gtv(x, y, sys, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(std::abs(r.beta(0) - r.beta(1)), 1e-6);
    EXPECT_GT(std::abs(r.beta(0)), 0.1);
}

TEST(FitGtv, KktCertificateAndObjectiveReevaluation) {
    Scenario sc;
    sc.family = Family::block;
    sc.p = 20;
    sc.K = 4;
    sc.s = 5;
    sc.n = 40;
    const Matrix sigma = make_covariance(sc).matrix;
    const auto draw = make_beta(sc);
    const auto data = sample_data(sigma, draw.beta, sc.n, 0.1, 9);
    const auto g = build_graph(sigma);
    for (double l1 : {1e-3, 1e-2, 0.1})
        for (double ltv : {0.0, 1.0, 4.0})
            for (double ls : {0.0, 0.5}) {
                GtvConfig cfg;
                cfg.lambda_1 = l1;
                cfg.lambda_tv = ltv;
                cfg.lambda_s = ls;
                const auto sys = incidence(g, ltv);
                const auto r = fit_gtv(data.x, data.y, sys, cfg);
                ASSERT_TRUE(r.converged) << l1 << " " << ltv << " " << ls;
                EXPECT_LE(r.kkt_residual, 10.0 * cfg.tol_primal);
                EXPECT_NEAR(r.objective, objective(r.beta, data.x, data.y, sys, cfg), 1e-8);
            }
}

TEST(FitGtv, EdgeReorderingInvariance) {
    Rng rng(10);
    Matrix s = Matrix::Identity(10, 10);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (Index j = 0; j < 10; ++j)
        for (Index k = j + 1; k < 10; ++k)
            if ((j + k) % 3 == 0) s(j, k) = s(k, j) = u(rng);
    const auto g = build_graph(s);
    auto shuffled = g;
    std::shuffle(shuffled.edges.begin(), shuffled.edges.end(), rng);
    const auto pr = make_problem(30, 10, 11);
    GtvConfig cfg;
    cfg.lambda_1 = 0.05;
    cfg.lambda_tv = 2.0;
    cfg.lambda_s = 0.3;
    const auto a = fit_gtv(pr.x, pr.y, incidence(g, 2.0), cfg);
    const auto b = fit_gtv(pr.x, pr.y, incidence(shuffled, 2.0), cfg);
    EXPECT_LT((a.beta - b.beta).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(FitGtv, WarmStartPathMatchesColdStarts) {
    const auto pr = make_problem(40, 15, 12);
    const auto sys = incidence(chain_graph(15, 0.4), 1.0);
    GtvSolver solver(pr.x, pr.y, sys);
    AdmmState st;
    for (double l1 : {1.0, 0.3, 0.1, 0.03, 0.01, 0.001}) {
        GtvConfig cfg;
        cfg.lambda_1 = l1;
        cfg.lambda_tv = 1.0;
        cfg.lambda_s = 0.1;
        const auto warm = solver.solve(cfg, &st);
        const auto cold = fit_gtv(pr.x, pr.y, sys, cfg);
        EXPECT_TRUE(warm.converged);
        EXPECT_LT(rel_gap(warm.objective, cold.objective), 1e-6) << l1;
    }
}

TEST(FitGtv, IterationCapReportsNonConvergence) {
    const auto pr = make_problem(40, 15, 13);
    GtvConfig cfg;
    cfg.lambda_1 = 0.01;
    cfg.lambda_tv = 1.0;
    cfg.max_iters = 2;
    const auto r = fit_gtv(pr.x, pr.y, incidence(chain_graph(15, 0.4), 1.0), cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 2);
    EXPECT_EQ(r.beta.size(), 15);
}

TEST(ElasticNet, ZeroRidgeIsLasso) {
    const auto pr = make_problem(50, 10, 14);
    const double lam = 5.0;  // unnormalized scale
    const auto en = fit_elastic_net(pr.x, pr.y, lam, 0.0);
    const Vector cd = oracle::lasso_cd(pr.x, pr.y, lam / 50.0);
    EXPECT_LT(rel_gap(en.objective, 50.0 * oracle::lasso_objective(pr.x, pr.y, cd, lam / 50.0)), 1e-6);
    EXPECT_NEAR(en.objective, elastic_net_objective(en.beta, pr.x, pr.y, lam, 0.0), 1e-8 * en.objective);
}

TEST(ElasticNet, ZeroL1IsRidge) {
    const auto pr = make_problem(50, 10, 15);
    const auto en = fit_elastic_net(pr.x, pr.y, 0.0, 2.0);
    const Matrix a = pr.x.transpose() * pr.x + 2.0 * Matrix::Identity(10, 10);
    const Vector closed = a.ldlt().solve(pr.x.transpose() * pr.y);
    EXPECT_LT((en.beta - closed).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(ElasticNet, DuplicateColumnsGetEqualCoefficients) {
    Rng rng(16);
    Matrix x = standard_normal(40, 4, rng);
    x.col(2) = x.col(0);
    const Vector y = 1.5 * x.col(0) - x.col(1) + 0.1 * standard_normal(40, 1, rng).col(0);
    const auto en = fit_elastic_net(x, y, 1.0, 1.0);
    EXPECT_TRUE(en.converged);
    EXPECT_LT(std::abs(en.beta(0) - en.beta(2)), 1e-6);
    EXPECT_THROW(fit_elastic_net(x, y, -1.0, 0.0), invalid_input);
}

TEST(Support, Threshold) {
    Vector b(4);
    b << 0.0, 1e-7, -0.5, 2e-6;
    EXPECT_EQ(support_of(b), (std::vector<Index>{2, 3}));
}

#include <gtest/gtest.h>

#include <cmath>

#include "gtv/owl.hpp"
#include "oracles.hpp"

using namespace gtv;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double e : v) out(i++) = e;
    return out;
}

}  // namespace

TEST(OscarWeights, Values) {
    EXPECT_EQ(oscar_weights(3, 1.0, 0.5), vec({2.0, 1.5, 1.0}));
    EXPECT_EQ(oscar_weights(2, 0.3, 0.0), vec({0.3, 0.3}));
    EXPECT_THROW(oscar_weights(2, -1.0, 0.0), invalid_input);
}

TEST(OwlNorm, SortsMagnitudes) {
    EXPECT_NEAR(owl_norm(vec({-1.0, 3.0}), vec({2.0, 1.0})), 7.0, 1e-15);
    EXPECT_THROW(owl_norm(vec({1.0}), vec({1.0, 1.0})), invalid_input);
}

TEST(OwlProx, Examples) {
    const Vector v = vec({-2.0, 0.3, 1.2, -0.1});
    const Vector w = Vector::Constant(4, 0.5);
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(owl_prox(v, w)(i), detail::soft_threshold(v(i), 0.5), 1e-15);

    const Vector a = owl_prox(vec({3.0, 1.0}), vec({2.0, 1.0}));
    EXPECT_NEAR(a(0), 1.0, 1e-15);
    EXPECT_NEAR(a(1), 0.0, 1e-15);

    const Vector b = owl_prox(vec({2.0, 2.5}), vec({2.0, 1.0}));
    EXPECT_NEAR(b(0), 0.75, 1e-15);
    EXPECT_NEAR(b(1), 0.75, 1e-15);
    const Vector c = owl_prox(vec({-2.0, 2.5}), vec({2.0, 1.0}));
    EXPECT_NEAR(c(0), -0.75, 1e-15);
    EXPECT_NEAR(c(1), 0.75, 1e-15);
}

TEST(OwlProx, RejectsBadWeights) {
    EXPECT_THROW(owl_prox(vec({1.0, 2.0}), vec({1.0, 2.0})), invalid_input);
    EXPECT_THROW(owl_prox(vec({1.0, 2.0}), vec({0.0, -1.0})), invalid_input);
    EXPECT_THROW(owl_prox(vec({1.0, 2.0}), vec({1.0})), invalid_input);
}

TEST(OwlProx, MatchesGridSearch) {
    Rng rng(77);
    std::uniform_real_distribution<double> uv(-4.0, 4.0), uw(0.0, 1.5);
    for (int rep = 0; rep < 8; ++rep) {
        const Index p = rep < 3 ? 2 : 3;
        Vector v(p), w(p);
        for (Index i = 0; i < p; ++i) {
            v(i) = uv(rng);
            w(i) = uw(rng);
        }
        std::sort(w.data(), w.data() + p, std::greater<>());
        const Vector got = owl_prox(v, w);
        const Vector grid = oracle::owl_prox_grid(v, w);
        EXPECT_LT((got - grid).lpNorm<Eigen::Infinity>(), 2e-3) << "rep " << rep;
        EXPECT_LE(oracle::owl_value(got, v, w), oracle::owl_value(grid, v, w) + 1e-12);
    }
}

TEST(OwlProx, SignsAndOrderPreserved) {
    Rng rng(78);
    for (int rep = 0; rep < 50; ++rep) {
        const Vector v = 3.0 * standard_normal(6, 1, rng).col(0);
        const Vector w = oscar_weights(6, 0.2, 0.1);
        const Vector x = owl_prox(v, w);
        for (Index i = 0; i < 6; ++i) {
            EXPECT_TRUE(x(i) == 0.0 || (x(i) > 0) == (v(i) > 0));
            for (Index k = 0; k < 6; ++k)
                if (std::abs(v(i)) > std::abs(v(k))) {
                    EXPECT_GE(std::abs(x(i)), std::abs(x(k)) - 1e-15);
                }
        }
    }
}

TEST(FitOwl, ZeroLambda2MatchesLasso) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const Matrix x = standard_normal(50, 20, rng);
        Vector b = Vector::Zero(20);
        b.head(4) << 2, -1, 1.5, 1;
        const Vector y = x * b + 0.2 * standard_normal(50, 1, rng).col(0);
        const double lam = 10.0;
        const auto r = fit_owl(x, y, lam, 0.0);
        const Vector cd = oracle::lasso_cd(x, y, lam / 50.0);
        const double want = 50.0 * oracle::lasso_objective(x, y, cd, lam / 50.0);
        EXPECT_TRUE(r.converged);
        EXPECT_LT(std::abs(r.objective - want) / want, 1e-5) << "seed " << seed;
    }
}

TEST(FitOwl, IdenticalColumnsClusterTogether) {
    Rng rng(5);
    Matrix x = standard_normal(40, 4, rng);
    x.col(3) = x.col(1);
    const Vector y = 2.0 * x.col(1) - x.col(0) + 0.1 * standard_normal(40, 1, rng).col(0);
    const auto r = fit_owl(x, y, 1.0, 0.5);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(std::abs(std::abs(r.beta(1)) - std::abs(r.beta(3))), 1e-6);
    EXPECT_NEAR(r.objective, (y - x * r.beta).squaredNorm() + owl_norm(r.beta, oscar_weights(4, 1.0, 0.5)), 1e-8);
}

TEST(FitOwl, ZeroResponseGivesZero) {
    Rng rng(6);
    const Matrix x = standard_normal(10, 3, rng);
    const auto r = fit_owl(x, Vector::Zero(10), 0.1, 0.1);
    EXPECT_EQ(r.beta, Vector::Zero(3));
    EXPECT_TRUE(r.converged);
}

TEST(FitOwl, Errors) {
    EXPECT_THROW(fit_owl(Matrix::Zero(3, 2), Vector::Zero(2), 0.1, 0.1), invalid_input);
    EXPECT_THROW(fit_owl(Matrix::Zero(3, 2), Vector::Zero(3), -0.1, 0.1), invalid_input);
    GtvConfig cap;
    cap.max_iters = 1;
    Rng rng(7);
    const Matrix x = standard_normal(20, 5, rng);
    const auto r = fit_owl(x, x * Vector::Ones(5), 0.01, 0.01, cap);
    EXPECT_FALSE(r.converged);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::fabs((a) - (b)) <= (tol))

#include <cmath>

#include "oracles.hpp"
#include "relsyn/measures.hpp"

using namespace relsyn;

TEST_CASE("standard normal cdf against quadrature") {
    for (double x = -8.0; x <= 8.0 + 1e-9; x += 0.25)
        CHECK_NEAR(std_normal_cdf(x), oracle::phi_quadrature(x), 1e-12);
    CHECK_NEAR(std_normal_cdf(-1.0), 0.15865525393145707, 1e-12);
    CHECK(std_normal_cdf(0.0) == 0.5);
}

TEST_CASE("cdf far tail dominated by the analytic bound") {
    // 1 - Phi(8) evaluated as Phi(-8): the direct subtraction cancels at the
    // last ulp while the erfc route keeps full relative precision.
    double tail = std_normal_cdf(-8.0);
    CHECK(tail > 0.0);
    CHECK(tail <= oracle::normal_tail_bound(8.0));
    CHECK(std_normal_cdf(8.0) >= 1.0 - 1e-14);
}

TEST_CASE("cdf monotone and symmetric") {
    double prev = -1.0;
    for (double x = -10.0; x <= 10.0 + 1e-9; x += 0.1) {
        double c = std_normal_cdf(x);
        CHECK(c >= prev);
        prev = c;
        CHECK(std::fabs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) < 1e-12);
    }
}

TEST_CASE("quantile inverts cdf") {
    for (double x = -5.0; x <= 5.0 + 1e-9; x += 0.37)
        CHECK_NEAR(std_normal_quantile(std_normal_cdf(x)), x, 1e-9);
    // Left tail keeps relative precision in p, so the inverse stays tight;
    // near p = 1 accuracy is capped by the spacing of doubles around 1.
    CHECK_NEAR(std_normal_quantile(std_normal_cdf(-7.5)), -7.5, 1e-9);
    CHECK_NEAR(std_normal_quantile(std_normal_cdf(6.5)), 6.5, 1e-5);
    CHECK_THROWS(std_normal_quantile(0.0));
    CHECK_THROWS(std_normal_quantile(1.0));
}

TEST_CASE("cell mass basics") {
    GaussianMeasure g{{0.0}, {1.0}, std::nullopt};
    CHECK_NEAR(cell_mass(g, Box({-0.5}, {0.5})), 0.3829249225480262, 1e-12);
    CHECK_NEAR(cell_mass(g, Box({-kInf}, {kInf})), 1.0, 1e-12);

    SUBCASE("additivity over a split") {
        Rng rng(7);
        for (int i = 0; i < 50; ++i) {
            double a = -3 + 6 * rng.uniform();
            double b = a + 3 * rng.uniform();
            double m1 = -1 + 2 * rng.uniform();
            GaussianMeasure h{{m1}, {0.1 + 2 * rng.uniform()}, std::nullopt};
            double cut1 = a + (b - a) * 0.3, cut2 = a + (b - a) * 0.8;
            double whole = cell_mass(h, Box({a}, {b}));
            double parts = cell_mass(h, Box({a}, {cut1})) + cell_mass(h, Box({cut1}, {cut2})) +
                           cell_mass(h, Box({cut2}, {b}));
            CHECK(std::fabs(whole - parts) < 1e-12);
        }
    }

    SUBCASE("product over dimensions") {
        GaussianMeasure g2{{0.0, 1.0}, {1.0, 4.0}, std::nullopt};
        double m = cell_mass(g2, Box({-1.0, 0.0}, {1.0, 2.0}));
        GaussianMeasure gx{{0.0}, {1.0}, std::nullopt}, gy{{1.0}, {4.0}, std::nullopt};
        double ref = cell_mass(gx, Box({-1.0}, {1.0})) * cell_mass(gy, Box({0.0}, {2.0}));
        CHECK_NEAR(m, ref, 1e-14);
    }

    SUBCASE("truncation renormalizes") {
        GaussianMeasure t{{0.0}, {1.0}, Box({-0.5}, {0.5})};
        CHECK_NEAR(cell_mass(t, Box({-0.5}, {0.5})), 1.0, 1e-12);
        CHECK_NEAR(cell_mass(t, Box({-2.0}, {2.0})), 1.0, 1e-12);
        // Conditional mass of [0, 0.5] given [-0.5, 0.5].
        GaussianMeasure u{{0.0}, {1.0}, std::nullopt};
        double cond = cell_mass(u, Box({0.0}, {0.5})) / cell_mass(u, Box({-0.5}, {0.5}));
        CHECK_NEAR(cell_mass(t, Box({0.0}, {0.5})), cond, 1e-12);
    }
}

TEST_CASE("coupling deficiency closed form vs density overlap") {
    // deficiency = 1 - integral of min densities for equal-covariance pairs.
    CHECK_NEAR(coupling_deficiency({1.0}, {1.0}, NormMode::weighted), 0.3829249225480262, 1e-12);
    CHECK_NEAR(coupling_deficiency({1.0}, {0.25}, NormMode::weighted), 0.6826894921370859, 1e-12);
    CHECK(coupling_deficiency({0.0, 0.0}, {1.0, 2.0}, NormMode::weighted) == 0.0);

    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        double shift = -3.0 + 6.0 * rng.uniform();
        double var = 0.05 + 3.0 * rng.uniform();
        double got = coupling_deficiency({shift}, {var}, NormMode::weighted);
        double want = 1.0 - oracle::overlap_min_densities_1d(0.0, shift, var);
        CHECK_NEAR(got, want, 1e-6);
    }

    SUBCASE("unweighted mode ignores the covariance scale") {
        double a = coupling_deficiency({0.7, -0.3}, {1.0, 1.0}, NormMode::unweighted);
        double b = coupling_deficiency({0.7, -0.3}, {9.0, 0.04}, NormMode::unweighted);
        CHECK(a == b);
        CHECK_NEAR(a, deficiency_from_distance(std::hypot(0.7, 0.3)), 1e-15);
    }

    SUBCASE("2d reduction against dense 2d integration") {
        std::vector<double> mu{0.6, -0.4}, var{0.8, 0.3};
        double got = coupling_deficiency(mu, var, NormMode::weighted);
        double want = 1.0 - oracle::overlap_min_densities_2d({0.0, 0.0}, mu, var, 0.01);
        CHECK_NEAR(got, want, 2e-4);
    }

    SUBCASE("monotone in the scaled distance") {
        double prev = -1.0;
        for (double s = 0.0; s <= 4.0; s += 0.1) {
            double d = coupling_deficiency({s}, {0.7}, NormMode::weighted);
            CHECK(d >= prev);
            prev = d;
        }
    }
}

TEST_CASE("sampling stays in support and matches moments") {
    SUBCASE("deterministic under a fixed seed") {
        GaussianMeasure g{{0.0, 1.0}, {1.0, 0.5}, Box({-1.0, -kInf}, {1.0, kInf})};
        Rng r1(42), r2(42);
        for (int i = 0; i < 100; ++i) {
            auto a = sample(g, r1), b = sample(g, r2);
            CHECK(a == b);
        }
    }

    SUBCASE("rejection branch, tight symmetric support") {
        GaussianMeasure g{{0.0}, {1.0}, Box({-0.5}, {0.5})};
        Rng rng(123);
        const int n = 100000;
        double mean = 0.0;
        int in_upper_half = 0;
        for (int i = 0; i < n; ++i) {
            double x = sample(g, rng)[0];
            REQUIRE(x >= -0.5);
            REQUIRE(x <= 0.5);
            mean += x;
            if (x >= 0.0) ++in_upper_half;
        }
        mean /= n;
        CHECK(std::fabs(mean) < 3.0 * 0.3 / std::sqrt(double(n)));
        CHECK(std::fabs(in_upper_half / double(n) - 0.5) < 3.0 * 0.5 / std::sqrt(double(n)));
    }

    SUBCASE("inverse-cdf branch, far tail support") {
        // Acceptance ~ 2.9e-7, far below the 10% rejection threshold.
        GaussianMeasure g{{0.0}, {1.0}, Box({5.0}, {6.0})};
        Rng rng(99);
        const int n = 20000;
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = sample(g, rng)[0];
            REQUIRE(x >= 5.0);
            REQUIRE(x <= 6.0);
            mean += x;
        }
        mean /= n;
        // E[X | X in [5,6]] = (pdf(5)-pdf(6)) / (Phi(6)-Phi(5)).
        double want = (oracle::normal_pdf(5.0) - oracle::normal_pdf(6.0)) /
                      (std_normal_cdf(6.0) - std_normal_cdf(5.0));
        CHECK_NEAR(mean, want, 0.02);
    }
}

TEST_CASE("clopper-pearson endpoints solve the tail equations") {
    // Defining property: P(X >= k | p = hi) = alpha/2 and P(X <= k | p = lo) = alpha/2.
    struct Case { long k, n; };
    for (auto c : {Case{0, 100}, Case{100, 100}, Case{50, 100}, Case{3, 17}, Case{990, 1000}}) {
        auto iv = clopper_pearson(c.k, c.n, 0.95);
        CHECK(iv.lo <= double(c.k) / c.n);
        CHECK(iv.hi >= double(c.k) / c.n);
        if (c.k > 0) {
            double tail = oracle::binomial_upper_tail(c.k, c.n, iv.lo);
            CHECK_NEAR(tail, 0.025, 1e-7);
        } else {
            CHECK(iv.lo == 0.0);
        }
        if (c.k < c.n) {
            double tail = 1.0 - oracle::binomial_upper_tail(c.k + 1, c.n, iv.hi);
            CHECK_NEAR(tail, 0.025, 1e-7);
        } else {
            CHECK(iv.hi == 1.0);
        }
    }
    CHECK_NEAR(clopper_pearson(0, 100, 0.95).hi, 1.0 - std::pow(0.025, 1.0 / 100), 1e-9);
}

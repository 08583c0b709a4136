#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "relsyn/abstraction.hpp"
#include "relsyn/gmdp.hpp"
#include "relsyn/measures.hpp"
#include "relsyn/rng.hpp"

#define CHECK_NEAR(a, b, tol) CHECK(std::fabs((a) - (b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::fabs((a) - (b)) <= (tol))

using namespace relsyn;

namespace {

GmdpModel line_model(double a, double b, double noise_var) {
    GmdpModel m;
    m.name = "line";
    m.state_space = Box({-2.5}, {2.5});
    m.initial_set = m.state_space;
    m.input_space = Box({-5.0}, {5.0});
    m.drift.kind = DriftForm::Kind::linear;
    m.drift.A = Matrix(1, 1, {a});
    m.drift.B = Matrix(1, 1, {b});
    m.noise.mean = {0.0};
    m.noise.var = {noise_var};
    m.output_map = Matrix::identity(1);
    return m;
}

GridSpec line_grid(int cells, std::vector<std::vector<double>> levels) {
    GridSpec g;
    g.domain = Box({-2.5}, {2.5});
    g.cells = {cells};
    g.input_levels = std::move(levels);
    return g;
}

GmdpModel random_planar_model(uint64_t seed) {
    Rng rng(seed);
    GmdpModel m;
    m.name = "planar";
    m.state_space = Box({-2.0, -3.0}, {2.0, 3.0});
    m.initial_set = m.state_space;
    m.input_space = Box({-1.0}, {1.0});
    m.drift.kind = DriftForm::Kind::linear;
    m.drift.A = Matrix(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.drift.A.at(i, j) = 2.0 * rng.uniform() - 1.0;
    m.drift.B = Matrix(2, 1, {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
    m.noise.mean = {0.0, 0.0};
    m.noise.var = {0.7, 1.3};
    m.output_map = Matrix::identity(2);
    return m;
}

}  // namespace

TEST_CASE("grid mechanics") {
    GridSpec g;
    g.domain = Box({0.0, -1.0}, {2.0, 1.0});
    g.cells = {4, 5};
    g.input_levels = {{}};
    REQUIRE(g.total_cells() == 20);

    SUBCASE("encode and decode round trip") {
        for (int f = 0; f < 20; ++f) CHECK(g.encode(g.decode(f)) == f);
        CHECK(g.decode(0) == std::vector<int>{0, 0});
        CHECK(g.decode(1) == std::vector<int>{0, 1});
        CHECK(g.decode(5) == std::vector<int>{1, 0});
    }

    SUBCASE("representatives are cell centers") {
        std::vector<double> rep = g.representative(0);
        CHECK_NEAR(rep[0], 0.25, 1e-15);
        CHECK_NEAR(rep[1], -0.8, 1e-15);
        for (int f = 0; f < 20; ++f) CHECK(g.cell_box(f).contains(g.representative(f), 0.0));
    }

    SUBCASE("locate is the inverse of representative") {
        for (int f = 0; f < 20; ++f) CHECK(g.locate(g.representative(f)) == f);
        CHECK(g.locate({-0.1, 0.0}) == -1);
        CHECK(g.locate({2.1, 0.0}) == -1);
        CHECK(g.locate({2.0, 1.0}) == 19);  // top corner belongs to the last cell
    }

    SUBCASE("uniform input levels include endpoints") {
        auto levels = GridSpec::uniform_levels(Box({-5.0}, {5.0}), 5);
        REQUIRE(levels.size() == 5);
        CHECK(levels[0] == std::vector<double>{-5.0});
        CHECK(levels[2] == std::vector<double>{0.0});
        CHECK(levels[4] == std::vector<double>{5.0});
        auto single = GridSpec::uniform_levels(Box({-5.0}, {5.0}), 1);
        REQUIRE(single.size() == 1);
        CHECK(single[0][0] == 0.0);
        auto planar = GridSpec::uniform_levels(Box({0.0, 0.0}, {1.0, 1.0}), 3);
        CHECK(planar.size() == 9);
    }
}

TEST_CASE("transition rows of a scalar contraction") {
    GmdpModel m = line_model(0.8, 1.0, 1.0);
    FiniteAbstraction fab = build_abstraction(m, line_grid(5, {{0.0}}));
    REQUIRE(fab.num_states() == 5);
    REQUIRE(fab.num_inputs() == 1);

    SUBCASE("self mass of the centered cell") {
        // Mean 0.8 * 0 + 0 = 0 over cell [-0.5, 0.5] with unit variance.
        std::vector<double> row = fab.row(2, 0);
        CHECK_NEAR(row[2], std_normal_cdf(0.5) - std_normal_cdf(-0.5), 1e-12);
        CHECK_NEAR(row[2], 0.382925, 1e-6);
    }

    SUBCASE("row mass equals the in-domain probability") {
        for (int x = 0; x < 5; ++x) {
            std::vector<double> row = fab.row(x, 0);
            double s = 0.0;
            for (double v : row) s += v;
            CHECK_NEAR(s, fab.row_mass(x, 0), 1e-12);
            double mean = 0.8 * fab.representative(x)[0];
            double in_domain = std_normal_cdf(2.5 - mean) - std_normal_cdf(-2.5 - mean);
            CHECK_NEAR(s, in_domain, 1e-12);
            CHECK(s <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("refinement preserves in-domain mass for a state-free drift") {
    GmdpModel m = line_model(0.0, 1.0, 1.0);
    FiniteAbstraction coarse = build_abstraction(m, line_grid(5, {{0.3}}));
    FiniteAbstraction fine = build_abstraction(m, line_grid(10, {{0.3}}));
    REQUIRE_NEAR(coarse.row_mass(0, 0), fine.row_mass(0, 0), 1e-12);
    std::vector<double> crow = coarse.row(0, 0);
    std::vector<double> frow = fine.row(0, 0);
    for (int k = 0; k < 5; ++k) CHECK_NEAR(crow[k], frow[2 * k] + frow[2 * k + 1], 1e-12);
}

TEST_CASE("rows agree with direct quadrature on random planar models") {
    for (uint64_t seed : {11u, 12u}) {
        GmdpModel m = random_planar_model(seed);
        if (seed == 12u) m.noise.support = Box({-2.0, -20.0}, {2.0, 20.0});
        GridSpec g;
        g.domain = m.state_space;
        g.cells = {3, 4};
        g.input_levels = GridSpec::uniform_levels(m.input_space, 2);
        FiniteAbstraction fab = build_abstraction(m, g);

        Rng rng(seed * 977);
        for (int probe = 0; probe < 10; ++probe) {
            int cell = rng.next() % fab.num_states();
            int input = rng.next() % fab.num_inputs();
            int next = rng.next() % fab.num_states();
            std::vector<double> mean = drift_eval(m, fab.representative(cell),
                                                  fab.grid.input_levels[input], {}, {});
            Box target = fab.grid.cell_box(next);
            double expect = 1.0;
            for (int d = 0; d < 2; ++d) {
                double lo = target.lo[d], hi = target.hi[d];
                double norm = 1.0;
                if (m.noise.support) {
                    double slo = mean[d] + m.noise.support->lo[d];
                    double shi = mean[d] + m.noise.support->hi[d];
                    lo = std::max(lo, slo);
                    hi = std::min(hi, shi);
                    norm = oracle::adaptive_simpson(
                        [&](double t) { return oracle::normal_pdf(t, mean[d], m.noise.var[d]); },
                        slo, shi, 1e-13);
                }
                double mass =
                    lo >= hi ? 0.0
                             : oracle::adaptive_simpson(
                                   [&](double t) {
                                       return oracle::normal_pdf(t, mean[d], m.noise.var[d]);
                                   },
                                   lo, hi, 1e-13);
                expect *= mass / norm;
            }
            CHECK_NEAR(fab.row(cell, input)[next], expect, 1e-8);
        }
    }
}

TEST_CASE("grid certificate for a scalar contraction") {
    GmdpModel m = line_model(0.8, 1.0, 1.0);
    FiniteAbstraction fab = build_abstraction(m, line_grid(5, {{0.0}}));
    SimRelationCert cert = discretization_certificate(m, fab);

    SUBCASE("closed form at half-width 0.5") {
        CHECK_NEAR(cert.epsilon, 0.5, 1e-15);
        REQUIRE(cert.delta.size() == 1);
        CHECK_NEAR(cert.delta[0], deficiency_from_distance(0.8 * 0.5), 1e-15);
        CHECK(cert.relation.kind == RelationDescriptor::Kind::weighted_ball);
        CHECK(cert.relation.radius == cert.epsilon);
        CHECK(cert.interface.kind == InterfaceDescriptor::Kind::identity);
        CHECK(fab.cert.delta == cert.delta);  // stored at build time
    }

    SUBCASE("dense sweep of the cell never exceeds the certificate") {
        double worst = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            double x = -0.5 + i / 1000.0;  // cell around representative 0
            double dev = std::fabs(0.8 * x);
            worst = std::max(worst,
                             coupling_deficiency({dev}, m.noise.var, NormMode::weighted));
        }
        CHECK(worst <= cert.delta[0] + 1e-12);
        CHECK_NEAR(worst, cert.delta[0], 1e-9);  // corner attained
    }

    SUBCASE("coarsening never helps") {
        SimRelationCert fine = discretization_certificate(
            m, build_abstraction(m, line_grid(10, {{0.0}})));
        CHECK(fine.epsilon < cert.epsilon);
        CHECK(fine.delta[0] < cert.delta[0]);
        SimRelationCert very_fine = discretization_certificate(
            m, build_abstraction(m, line_grid(1000, {{0.0}})));
        CHECK(very_fine.delta[0] < 2e-3);
    }
}

TEST_CASE("certificate dominates sampled deviations on random planar models") {
    GmdpModel m = random_planar_model(21);
    GridSpec g;
    g.domain = m.state_space;
    g.cells = {5, 4};
    g.input_levels = GridSpec::uniform_levels(m.input_space, 3);
    FiniteAbstraction fab = build_abstraction(m, g);
    SimRelationCert cert = discretization_certificate(m, fab);

    Rng rng(4242);
    double worst = 0.0;
    for (int probe = 0; probe < 1000; ++probe) {
        int cell = rng.next() % fab.num_states();
        int input = rng.next() % fab.num_inputs();
        Box cb = fab.grid.cell_box(cell);
        std::vector<double> x(2), rep = fab.representative(cell);
        for (int d = 0; d < 2; ++d) x[d] = cb.lo[d] + (cb.hi[d] - cb.lo[d]) * rng.uniform();
        const auto& u = fab.grid.input_levels[input];
        std::vector<double> fx = drift_eval(m, x, u, {}, {});
        std::vector<double> fr = drift_eval(m, rep, u, {}, {});
        std::vector<double> dev = {fx[0] - fr[0], fx[1] - fr[1]};
        worst = std::max(worst, coupling_deficiency(dev, m.noise.var, NormMode::weighted));
    }
    CHECK(worst <= cert.delta[0] + 1e-12);
    CHECK(worst > 0.25 * cert.delta[0]);  // the bound is not vacuous
}

TEST_CASE("abstraction of the built-in nominal product") {
    CaseStudy cs = builtin_case_study();
    GmdpModel prod = compose_nominal_product(cs.reduced_agent, cs.simulator);
    GridSpec g;
    g.domain = prod.state_space;
    g.cells = {6, 6, 6, 6};
    g.input_levels = GridSpec::uniform_levels(prod.input_space, 3);
    FiniteAbstraction fab = build_abstraction(prod, g);
    REQUIRE(fab.num_states() == 1296);
    REQUIRE(fab.num_inputs() == 3);

    SUBCASE("kernel dependencies follow the drift sparsity") {
        REQUIRE(fab.kernels.size() == 4);
        CHECK(fab.kernels[0].deps == std::vector<int>{0});
        CHECK(fab.kernels[1].deps == std::vector<int>{0, 1});
        CHECK(fab.kernels[2].deps == std::vector<int>{2});
        CHECK(fab.kernels[3].deps == std::vector<int>{2, 3});
    }

    SUBCASE("rows are sub-probability everywhere") {
        for (int x = 0; x < fab.num_states(); x += 37)
            for (int u = 0; u < fab.num_inputs(); ++u)
                CHECK(fab.row_mass(x, u) <= 1.0 + 1e-12);
    }

    SUBCASE("certificate matches the hand formula") {
        std::vector<double> hw = fab.grid.half_widths();
        std::vector<double> dev = {0.8 * hw[0], 0.5 * hw[0] + hw[1], 0.8 * hw[2],
                                   0.5 * hw[2] + hw[3]};
        double c = 0.0;
        for (int d = 0; d < 4; ++d) c += dev[d] * dev[d] / prod.noise.var[d];
        SimRelationCert cert = discretization_certificate(prod, fab);
        CHECK_NEAR(cert.delta[0], deficiency_from_distance(std::sqrt(c)), 1e-14);
        double eps = 0.0;
        for (double h : hw) eps += h * h;
        CHECK_NEAR(cert.epsilon, std::sqrt(eps), 1e-14);
    }

    SUBCASE("dense materialization round trips through the columnar format") {
        FiniteGmdp f = fab.to_finite(2000);
        CHECK(static_cast<int>(f.initial.size()) == fab.num_states());
        std::string text = to_columnar(f);
        FiniteGmdp back = finite_gmdp_from_columnar(text);
        REQUIRE(back.num_states == f.num_states);
        for (int x = 0; x < f.num_states; x += 211)
            for (int y = 0; y < f.num_states; y += 173)
                CHECK(back.transition[x][1][y] == f.transition[x][1][y]);
    }
}

TEST_CASE("gridding refusals") {
    CaseStudy cs = builtin_case_study();
    GridSpec g;
    g.domain = Box({-0.05, -0.05, -0.05, 0.75, 0.0, -0.5},
                   {0.05, 0.05, 0.05, 3.75, 5.5, 0.5});
    g.cells = {2, 2, 2, 2, 2, 2};
    g.input_levels = {{}};
    CHECK_THROWS_WITH_AS(build_abstraction(cs.environment, g), "gridding needs linear drift",
                         std::invalid_argument);

    GmdpModel m = line_model(0.8, 1.0, 1.0);
    CHECK_THROWS_AS(build_abstraction(m, line_grid(5, {{99.0}})), std::invalid_argument);
    GridSpec bad = line_grid(5, {{0.0}});
    bad.domain = Box({0.0, 0.0}, {1.0, 1.0});
    CHECK_THROWS_AS(build_abstraction(m, bad), std::invalid_argument);

    FiniteAbstraction fab = build_abstraction(m, line_grid(5, {{0.0}}));
    CHECK_THROWS_AS(fab.to_finite(4), std::invalid_argument);
}

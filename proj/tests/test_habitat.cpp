#include "doctest.h"
#include "ide/habitat.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace ide;

TEST_CASE("uniform grid on the unit interval") {
    auto g = build_grid(0.0, 1.0, 4);
    REQUIRE(g.nodes.size() == 5);
    CHECK(g.nodes[0] == 0.0);
    CHECK(g.nodes[2] == doctest::Approx(0.5));
    CHECK(g.nodes[4] == 1.0);
    CHECK(g.h == doctest::Approx(0.25));
    CHECK(g.size() == 16);
    CHECK(g.weights().sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("single cell grid") {
    auto g = build_grid(-0.5, 0.5, 1);
    CHECK(g.cells() == 1);
    CHECK(g.h == doctest::Approx(1.0));
    CHECK(g.cell_of(0.3) == 0);
}

TEST_CASE("grid errors") {
    CHECK_THROWS_AS(build_grid(0.0, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(1.0, 0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(0.0, std::numeric_limits<double>::infinity(), 4), std::invalid_argument);
}

TEST_CASE("gauss quadrature integrates polynomials exactly") {
    auto g = make_grid(0.0, 1.0, 3, 3);
    auto u = GridFunction::sample(g, [](double x) { return x * x; });
    CHECK(u.values().row(0).dot(g->weights().transpose()) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    for (int order = 1; order <= 8; ++order) {
        std::vector<double> x, w;
        gauss_legendre(order, x, w);
        double s = 0.0, m = 0.0;
        for (int i = 0; i < order; ++i) {
            s += w[static_cast<std::size_t>(i)];
            m += w[static_cast<std::size_t>(i)] * std::pow(x[static_cast<std::size_t>(i)], 2 * order - 2);
        }
        CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
        CHECK(m == doctest::Approx(2.0 / (2 * order - 1)).epsilon(1e-12));
    }
}

TEST_CASE("lp norms of simple functions") {
    auto g = make_grid(0.0, 1.0, 8);
    CHECK(lp_norm(GridFunction::zero(g), 2.0) == 0.0);
    CHECK(lp_norm(GridFunction::constant(g, 1.0), 3.0) == doctest::Approx(1.0));
    auto x = GridFunction::sample(g, [](double s) { return s; }, 2.0, {[](double) { return 1.0; }});
    CHECK(lp_norm(x) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-13));
    CHECK(lp_norm(x, std::numeric_limits<double>::infinity()) == doctest::Approx(g->quad_points.back()));
    CHECK(space_norm(x, SmoothingSpace::w1p()) == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-12));
    CHECK(space_norm(x, SmoothingSpace::hoelder(1.0)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(lp_norm(x, 0.5), std::invalid_argument);
}

TEST_CASE("sobolev norm needs derivative data") {
    auto g = make_grid(0.0, 1.0, 4);
    auto u = GridFunction(g, Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(g->size())));
    CHECK_THROWS_AS(space_norm(u, SmoothingSpace::w1p()), std::invalid_argument);
}

TEST_CASE("hoelder norm grows with the exponent on a unit habitat") {
    auto g = make_grid(0.0, 1.0, 16);
    auto u = GridFunction::sample(g, [](double x) { return std::sin(3.0 * x); });
    double prev = 0.0;
    for (double a : {0.25, 0.5, 0.75, 1.0}) {
        double v = space_norm(u, SmoothingSpace::hoelder(a));
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("lp norm triangle inequality and homogeneity") {
    auto g = make_grid(0.0, 2.0, 32);
    std::mt19937 rng(7);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd a(1, static_cast<Eigen::Index>(g->size())), b(1, static_cast<Eigen::Index>(g->size()));
        for (Eigen::Index i = 0; i < a.cols(); ++i) {
            a(0, i) = n(rng);
            b(0, i) = n(rng);
        }
        GridFunction u(g, a), v(g, b);
        for (double p : {1.0, 2.0, 3.5}) {
            CHECK(lp_norm(u + v, p) <= lp_norm(u, p) + lp_norm(v, p) + 1e-12);
            CHECK(lp_norm(u * -2.5, p) == doctest::Approx(2.5 * lp_norm(u, p)));
        }
    }
}

TEST_CASE("norms of smooth functions agree across quadrature orders") {
    for (int order : {3, 4, 6}) {
        auto g = make_grid(0.0, 1.0, 16, order);
        auto u = GridFunction::sample(g, [](double x) { return std::exp(x); });
        CHECK(lp_norm(u, 2.0) == doctest::Approx(std::sqrt((std::exp(2.0) - 1.0) / 2.0)).epsilon(1e-10));
    }
}

TEST_CASE("evaluators and reconstruction") {
    auto g = make_grid(0.0, 1.0, 8);
    auto u = GridFunction::sample(g, [](double x) { return 3.0 * x + 1.0; });
    CHECK(u.eval(0.37) == doctest::Approx(2.11));
    auto bare = u.without_evaluator();
    CHECK_FALSE(bare.has_evaluator());
    CHECK(bare.eval(0.37) == doctest::Approx(2.11));
    CHECK_THROWS_AS(u.with_evaluator([](std::size_t, double) { return 0.0; }), std::invalid_argument);
    auto h = make_grid(0.0, 1.0, 4);
    CHECK_THROWS_AS(u + GridFunction::zero(h), std::invalid_argument);
}

TEST_CASE("mesh family admits divisible levels") {
    auto m = MeshFamily::uniform(1.0, {4, 8});
    CHECK(m.width(2.0, 4) == doctest::Approx(0.5));
    CHECK_THROWS_AS(SmoothingSpace::hoelder(1.5), std::invalid_argument);
}

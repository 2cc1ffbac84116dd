#include "doctest.h"
#include "ide/spectrum.hpp"

#include <cmath>
#include <random>

using namespace ide;

namespace {

const double kPi = std::acos(-1.0);

double sine(int k, double x) { return std::sqrt(2.0) * std::sin(k * kPi * x); }

KernelSpec sine_kernel(const std::vector<double>& weights) {
    std::vector<KernelSpec::Term> terms;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        int k = static_cast<int>(i) + 1;
        auto f = [k](double x) { return sine(k, x); };
        terms.push_back({weights[i], f, f, {}});
    }
    return KernelSpec::separable(terms);
}

ProblemPtr problem(KernelSpec k, std::size_t cells = 32, ProjectionScheme scheme = ProjectionScheme::piecewise_constant()) {
    auto p = std::make_shared<IDEProblem>();
    p->kernel = std::move(k);
    p->exponents = ExponentConfig::make(2.0, 1.5);
    p->grid = make_grid(0.0, 1.0, cells);
    p->scheme = std::move(scheme);
    return p;
}

LinearCocycle diag_cocycle(std::vector<double> d) {
    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    return LinearCocycle::periodic({Eigen::MatrixXd(v.asDiagonal())});
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("Floquet spectrum of autonomous and periodic problems") {
    // Level 0 keeps the full quadrature, so eigenvalues are exact to rounding.
    DiscreteModel half(problem(sine_kernel({0.5}), 16), 0);
    auto s = floquet_spectrum(half);
    REQUIRE(s.intervals.size() == 1);
    CHECK(s.intervals[0].lo == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(s.intervals[0].hi == s.intervals[0].lo);
    CHECK(s.method_name() == "floquet");

    auto alternating = sine_kernel({1.0}).with_phases(TimeModel::periodic(2), {0.5, 2.0});
    DiscreteModel two(problem(alternating, 16), 0);
    auto s2 = floquet_spectrum(two);
    REQUIRE(s2.intervals.size() == 1);
    CHECK(s2.intervals[0].lo == doctest::Approx(1.0).epsilon(1e-10));

    std::vector<KernelSpec::Term> t{{2.0, [](double x) { return std::sin(kPi * x); }, [](double x) { return std::sin(kPi * x); }, {}}};
    auto k = KernelSpec::separable(t);
    auto pr = problem(k);
    std::const_pointer_cast<IDEProblem>(pr)->scheme = build_spectral_basis(k, GrowthSpec::linear(), pr->grid, 16);
    auto s3 = floquet_spectrum(DiscreteModel(pr, 16));
    REQUIRE(s3.intervals.size() == 1);
    CHECK(std::abs(s3.intervals[0].lo - 1.0) < 1e-6);
}

TEST_CASE("Floquet spectrum needs periodic data") {
    auto k = sine_kernel({1.0}).with_phases(TimeModel::window(0), {0.5, 0.7, 0.9});
    DiscreteModel m(problem(k), 8);
    CHECK_THROWS_AS(floquet_spectrum(m), std::invalid_argument);
}

TEST_CASE("clustering and the accumulation floor") {
    auto s = floquet_spectrum(diag_cocycle({2.0, 2.0 + 5e-7, 0.5, 1e-6, 0.0}));
    REQUIRE(s.intervals.size() == 2);
    CHECK(s.intervals[0].hi == doctest::Approx(2.0 + 5e-7));
    CHECK(s.intervals[0].lo == doctest::Approx(2.0));
    CHECK(s.intervals[1].lo == doctest::Approx(0.5));
    REQUIRE(s.accumulation_floor);
    CHECK(*s.accumulation_floor == doctest::Approx(1e-4));
}

TEST_CASE("dichotomy test on scalar and diagonal cocycles") {
    auto c = diag_cocycle({0.5});
    auto r = dichotomy_test(c, 1.0);
    REQUIRE(r.admissible);
    CHECK(r.data->K == doctest::Approx(1.0));
    CHECK(r.data->rank == 1);
    CHECK(max_abs(r.data->P(3) - Eigen::MatrixXd::Identity(1, 1)) < 1e-14);
    CHECK_FALSE(dichotomy_test(c, 0.5).admissible);
    CHECK_FALSE(dichotomy_test(c, 0.5).witness.empty());

    auto d = diag_cocycle({0.5, 2.0});
    auto r2 = dichotomy_test(d, 1.0);
    REQUIRE(r2.admissible);
    CHECK(r2.data->rank == 1);
    CHECK(r2.data->alpha == doctest::Approx(0.5));
    CHECK(r2.data->beta == doctest::Approx(2.0));
    CHECK(r2.data->K == doctest::Approx(1.0));
    Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(2, 2);
    e0(0, 0) = 1.0;
    CHECK(max_abs(r2.data->P(0) - e0) < 1e-12);

    CHECK_THROWS_AS(dichotomy_test(c, 1.0, DichotomyOptions{39}), std::invalid_argument);
    CHECK_THROWS_AS(dichotomy_test(c, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dichotomy_test(c, -1.0), std::invalid_argument);
}

TEST_CASE("dichotomy test from labelled operators") {
    std::vector<DiscreteOperator> mats;
    for (int t = 0; t < 5; ++t) {
        Eigen::MatrixXd L(2, 2);
        L << 0.5, 0.1 * t, 0.0, 2.0;
        mats.push_back({L, t, 0, "test"});
    }
    auto r = dichotomy_test(mats, 1.0);
    REQUIRE(r.admissible);
    CHECK(r.data->rank == 1);
    CHECK(r.data->invariance_residual < 1e-8);
    CHECK(r.data->idempotence_residual < 1e-8);
    CHECK_FALSE(dichotomy_test(mats, 2.0).admissible);
    mats[2].time = 7;
    CHECK_THROWS_AS(dichotomy_test(mats, 1.0), std::invalid_argument);
}

TEST_CASE("non-normal splitting has K above one") {
    Eigen::MatrixXd L(2, 2);
    L << 0.5, 3.0, 0.0, 2.0;
    auto r = dichotomy_test(LinearCocycle::periodic({L}), 1.0);
    REQUIRE(r.admissible);
    CHECK(r.data->K > 1.0);
    Eigen::MatrixXd P = r.data->P(0);
    CHECK(max_abs(P * L - L * P) < 1e-12);
    CHECK(max_abs(P * P - P) < 1e-12);
    // Stable eigenvector (1,0), unstable (2,1).
    CHECK(max_abs(P * Eigen::Vector2d(2.0, 1.0)) < 1e-12);
    CHECK(max_abs(P * Eigen::Vector2d(1.0, 0.0) - Eigen::Vector2d(1.0, 0.0)) < 1e-12);
}

TEST_CASE("window cocycles with a transient") {
    // Operators vary on t = 10..15 and stay constant outside.
    std::vector<Eigen::MatrixXd> mats;
    for (int t = 0; t < 6; ++t) {
        Eigen::MatrixXd L(3, 3);
        L << 0.4 + 0.05 * t, 0.3, 0.0, 0.2 * std::sin(t), 3.0, 0.1, 0.0, 0.5, 0.2;
        mats.push_back(L);
    }
    LinearCocycle c;
    c.maps = {10, 0, mats};
    auto r = dichotomy_test(c, 1.0);
    REQUIRE(r.admissible);
    auto& D = *r.data;
    CHECK(D.rank == 2);
    for (int t = 0; t < 30; ++t) {
        const Eigen::MatrixXd& P = D.P(t);
        CHECK(max_abs(P * P - P) < 1e-8);
        CHECK(max_abs(D.P(t + 1) * c.at(t) - c.at(t) * P) < 1e-8 * std::max(1.0, c.at(t).norm()));
    }
    // Unstable fibres are images of the past unstable direction.
    Eigen::MatrixXd u = D.unstable.at(5);
    Eigen::MatrixXd img = c.transition(5, 14) * u;
    CHECK(subspace_distance(img, D.unstable.at(14)) < 1e-8);
}

TEST_CASE("dichotomy spectrum by scanning") {
    auto d = diag_cocycle({0.5, 2.0});
    auto s = dichotomy_spectrum(d, geometric_grid(0.1, 10.0, 40));
    REQUIRE(s.intervals.size() == 2);
    CHECK(std::abs(s.intervals[0].lo - 2.0) < 1e-3);
    CHECK(std::abs(s.intervals[0].hi - 2.0) < 1e-3);
    CHECK(std::abs(s.intervals[1].lo - 0.5) < 1e-3);
    CHECK(std::abs(s.intervals[1].hi - 0.5) < 1e-3);
    CHECK(s.method_name() == "window-scan");
    CHECK(s.resolvent_samples.size() == 40);

    auto z = dichotomy_spectrum(diag_cocycle({0.0, 0.0}), geometric_grid(0.01, 10.0, 20));
    CHECK(z.intervals.empty());
    for (auto& [g, ok] : z.resolvent_samples) CHECK(ok);

    CHECK_THROWS_AS(dichotomy_spectrum(d, {}), std::invalid_argument);
}

TEST_CASE("scan agrees with Floquet on periodic problems") {
    auto k = sine_kernel({1.0, 0.4, 0.1}).with_phases(TimeModel::periodic(3), {0.6, 1.3, 2.0});
    DiscreteModel m(problem(k), 16);
    auto f = floquet_spectrum(m);
    auto s = dichotomy_spectrum(m, geometric_grid(0.01, 5.0, 60));
    REQUIRE(f.intervals.size() == 3);
    REQUIRE(s.intervals.size() == f.intervals.size());
    for (std::size_t i = 0; i < f.intervals.size(); ++i) {
        CHECK(std::abs(s.intervals[i].lo - f.intervals[i].lo) < 2e-3);
        CHECK(std::abs(s.intervals[i].hi - f.intervals[i].hi) < 2e-3);
    }
}

TEST_CASE("scan endpoints do not depend on the grid spacing") {
    auto d = diag_cocycle({0.3, 0.9, 2.5});
    auto a = dichotomy_spectrum(d, geometric_grid(0.05, 5.0, 25));
    auto b = dichotomy_spectrum(d, geometric_grid(0.05, 5.0, 49));
    REQUIRE(a.intervals.size() == b.intervals.size());
    for (std::size_t i = 0; i < a.intervals.size(); ++i) {
        CHECK(std::abs(a.intervals[i].lo - b.intervals[i].lo) < 1e-3);
        CHECK(std::abs(a.intervals[i].hi - b.intervals[i].hi) < 1e-3);
    }
}

TEST_CASE("spectral splitting") {
    DiscreteModel m(problem(sine_kernel({0.5, 2.0}), 4), 0);
    auto D = spectral_splitting(m, 1.0);
    CHECK(D.K == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(D.rank == 15);
    CHECK(D.invariance_residual <= 1e-8);
    auto L = m.linear_ortho(0);
    CHECK(max_abs(D.P(1) * L - L * D.P(0)) <= 1e-8);

    auto top = spectral_splitting(m, 3.0);
    CHECK(max_abs(top.P(0) - Eigen::MatrixXd::Identity(16, 16)) < 1e-12);
    CHECK_THROWS_AS(spectral_splitting(m, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(spectral_splitting(m, 0.5), std::invalid_argument);
}

TEST_CASE("projectors are idempotent with constant rank") {
    auto k = sine_kernel({1.0, 0.4, 0.1}).with_phases(TimeModel::periodic(3), {0.6, 1.3, 2.0});
    DiscreteModel m(problem(k), 16);
    auto f = floquet_spectrum(m);
    double gamma = std::sqrt(f.intervals[0].lo * f.intervals[1].lo);
    auto D = spectral_splitting(m, gamma);
    for (int t = -3; t < 9; ++t) {
        auto& P = D.P(t);
        CHECK(max_abs(P * P - P) < 1e-8);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(P);
        lu.setThreshold(1e-8);
        CHECK(static_cast<std::size_t>(lu.rank()) == D.rank);
        Eigen::MatrixXd sum = P + (Eigen::MatrixXd::Identity(16, 16) - P);
        CHECK(max_abs(sum - Eigen::MatrixXd::Identity(16, 16)) == 0.0);
    }
}

TEST_CASE("spectral bundles of a diagonal problem") {
    auto d = diag_cocycle({0.5, 2.0});
    auto b = spectral_bundles(d, {1.0});
    REQUIRE(b.size() == 2);
    CHECK(b[0].dimension == 1);
    CHECK(b[1].dimension == 1);
    CHECK(std::abs(std::abs(b[0].fiber(0)(1, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(b[1].fiber(0)(0, 0)) - 1.0) < 1e-12);
}

TEST_CASE("bundle dimensions add up on a three-mode problem") {
    DiscreteModel m(problem(sine_kernel({3.0, 1.0, 0.3}), 4), 0);
    auto b = spectral_bundles(m, {2.0, 0.6, 0.1});
    REQUIRE(b.size() == 4);
    CHECK(b[0].dimension == 1);
    CHECK(b[1].dimension == 1);
    CHECK(b[2].dimension == 1);
    CHECK(b[3].dimension == 13);
    auto unstable = spectral_splitting(m, 0.1);
    CHECK(16 - unstable.rank == b[0].dimension + b[1].dimension + b[2].dimension);
    auto L = m.linear_ortho(0);
    for (auto& bundle : b) {
        Eigen::MatrixXd F = bundle.fiber(0);
        Eigen::MatrixXd out = L * F - F * (F.transpose() * L * F);
        CHECK(max_abs(out) < 1e-8);
    }
    CHECK_THROWS_AS(spectral_bundles(m, {0.8, 0.7}), std::invalid_argument);
    CHECK_THROWS_AS(spectral_bundles(m, {1.0}), std::invalid_argument);
}

TEST_CASE("rank-one kernel gives a line and its complement") {
    auto pr = problem(sine_kernel({1.0}));
    DiscreteModel m(pr, 16);
    auto b = spectral_bundles(m, {0.5});
    REQUIRE(b.size() == 2);
    CHECK(b[0].dimension == 1);
    CHECK(b[1].dimension == 15);
    // The line is the eigenfunction sampled in orthonormal coordinates.
    Eigen::VectorXd chi = m.to_ortho(m.coordinates(GridFunction::sample(pr->grid, [](double x) { return sine(1, x); })));
    CHECK(subspace_distance(b[0].fiber(0), chi) < 1e-10);
}

TEST_CASE("spectrum is upper semicontinuous under refinement") {
    auto k = sine_kernel({1.0, 0.5, 0.05});
    std::vector<KernelSpec::Term> terms = k.terms();
    terms.push_back({0.02, [](double x) { return std::exp(x); }, [](double y) { return std::exp(y); }, {}});
    auto pr = problem(KernelSpec::separable(terms), 128);
    auto ref = floquet_spectrum(DiscreteModel(pr, 128), 1e-2);
    for (std::size_t n : {32, 64}) {
        auto s = floquet_spectrum(DiscreteModel(pr, n), 1e-2);
        for (auto& iv : s.intervals) {
            double dist = 1e9;
            for (auto& r : ref.intervals) dist = std::min(dist, std::max({0.0, r.lo - iv.hi, iv.lo - r.hi}));
            CHECK(dist < 0.05);
        }
    }
}

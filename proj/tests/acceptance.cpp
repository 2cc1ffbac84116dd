// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "ide/bundles.hpp"
#include "ide/config.hpp"
#include "ide/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace ide;

namespace {

const double kPi = std::acos(-1.0);
const double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Accumulates named checks; the first failing one is reported.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && out_.pass) {
            out_.pass = false;
            first_failure_ = what;
        }
    }
    void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
    Outcome result() const {
        Outcome o = out_;
        o.detail = o.pass ? notes_ : "failed: " + first_failure_ + (notes_.empty() ? "" : " [" + notes_ + "]");
        return o;
    }

private:
    Outcome out_;
    std::string first_failure_;
    std::string notes_;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double order_of(const std::vector<std::size_t>& ns, const std::vector<double>& es) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < ns.size(); ++i) pairs.emplace_back(static_cast<double>(ns[i]), es[i]);
    return fit_order(pairs);
}

GridFunction random_function(const HabitatPtr& g, std::mt19937& rng, double amp) {
    std::uniform_real_distribution<double> u(-amp, amp);
    Eigen::MatrixXd v(1, static_cast<Eigen::Index>(g->size()));
    for (Eigen::Index i = 0; i < v.cols(); ++i) v(0, i) = u(rng);
    return GridFunction(g, v);
}

ProblemPtr linear_problem(KernelSpec k, std::size_t cells) {
    auto p = std::make_shared<IDEProblem>();
    p->kernel = std::move(k);
    p->exponents = ExponentConfig::make(2.0, 1.5);
    p->grid = make_grid(0.0, 1.0, cells);
    p->scheme = ProjectionScheme::piecewise_constant();
    return p;
}

KernelSpec sine_kernel(const std::vector<double>& weights) {
    std::vector<KernelSpec::Term> terms;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double k = static_cast<double>(i + 1);
        auto f = [k](double x) { return std::sqrt(2.0) * std::sin(k * kPi * x); };
        terms.push_back({weights[i], f, f, {}});
    }
    return KernelSpec::separable(terms);
}

LinearCocycle diag_cocycle(std::vector<double> d) {
    Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    return LinearCocycle::periodic({Eigen::MatrixXd(v.asDiagonal())});
}

// Evenly spaced one-dimensional base coordinates.
std::vector<Eigen::VectorXd> line_samples(std::size_t count, double radius) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < count; ++i) {
        Eigen::VectorXd c(1);
        c(0) = -radius + 2.0 * radius * static_cast<double>(i) / static_cast<double>(count - 1);
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome projection_orders() {
    Checks c;
    auto g = make_grid(0.0, 1.0, 1024);
    const std::vector<std::size_t> ns{8, 16, 32, 64, 128, 256};
    auto smooth = GridFunction::sample(g, [](double x) { return std::sin(kPi * x); });
    auto root = GridFunction::sample(g, [](double x) { return std::sqrt(x); });
    std::vector<double> pc, pl, rt;
    for (auto n : ns) {
        pc.push_back(discretization_error(ProjectionScheme::piecewise_constant(), smooth, n, 2.0));
        pl.push_back(discretization_error(ProjectionScheme::piecewise_linear(), smooth, n, 2.0));
        // The square root's interpolation order shows in the sup norm.
        rt.push_back(discretization_error(ProjectionScheme::piecewise_linear(), root, n,
                                          std::numeric_limits<double>::infinity()));
    }
    const double opc = order_of(ns, pc), opl = order_of(ns, pl), ort = order_of(ns, rt);
    c.expect(std::abs(opc - 1.0) <= 0.15, "piecewise-constant order " + num(opc));
    c.expect(std::abs(opl - 2.0) <= 0.2, "piecewise-linear order " + num(opl));
    c.expect(std::abs(ort - 0.5) <= 0.1, "square-root order " + num(ort));
    c.note("orders PC " + num(opc) + ", PL " + num(opl) + ", sqrt " + num(ort));
    return c.result();
}

Outcome hille_tamarkin() {
    Checks c;
    auto g = make_grid(0.0, 1.0, 32);
    std::mt19937 rng(2);
    const auto lap = KernelSpec::laplace(2.0);
    double worst = -kInf;
    for (auto cfg : {ExponentConfig::make(2.0, 1.5), ExponentConfig::make(3.0, 1.5)}) {
        const double ht = hille_tamarkin_norm(lap, 0, cfg, *g);
        for (int i = 0; i < 200; ++i) {
            auto v = random_function(g, rng, 1.0);
            const double ratio = lp_norm(fredholm_apply(lap, 0, v), cfg.p) / lp_norm(v, cfg.q);
            worst = std::max(worst, ratio - ht);
            c.expect(ratio <= ht + 1e-8, "operator-norm estimate above the bound");
        }
    }
    const double cst = hille_tamarkin_norm(KernelSpec::constant(1.7), 0, ExponentConfig::make(2.0, 1.5), *g);
    c.expect(std::abs(cst - 1.7) <= 1e-10, "constant kernel gives " + num(cst));
    c.note("max estimate - bound " + num(worst) + ", constant kernel " + num(cst));
    return c.result();
}

Outcome smoothing_constants() {
    Checks c;
    auto g = make_grid(0.0, 1.0, 16);
    const auto lap_cfg = ExponentConfig::make(2.0, 1.5);
    const auto root_cfg = ExponentConfig::make(3.0, 2.0);
    const auto lap = KernelSpec::laplace(2.0);
    const auto root = KernelSpec::root_exp(1.0, 0.5);
    auto cl = smoothing_constant(lap, 0, lap_cfg, *g);
    auto cr = smoothing_constant(root, 0, root_cfg, *g);
    c.expect(std::abs(cl.C - std::sqrt(2.0)) <= 1e-12, "Laplace constant " + num(cl.C));
    c.expect(std::abs(cr.C - 0.5) <= 1e-12, "root-exponential constant " + num(cr.C));
    std::mt19937 rng(3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        auto v = random_function(g, rng, 1.0);
        const double rl = space_norm(fredholm_apply(lap, 0, v).with_p(lap_cfg.p), cl.space) / lp_norm(v, lap_cfg.q);
        const double rr = space_norm(fredholm_apply(root, 0, v), cr.space) / lp_norm(v, root_cfg.q);
        worst = std::max({worst, rl / cl.C, rr / cr.C});
        c.expect(rl <= cl.C + 1e-8, "Laplace smoothing ratio " + num(rl));
        c.expect(rr <= cr.C + 1e-8, "root-exponential smoothing ratio " + num(rr));
    }
    c.note("C = " + num(cl.C) + " and " + num(cr.C) + ", largest ratio/C " + num(worst));
    return c.result();
}

Outcome spectra() {
    Checks c;
    std::vector<KernelSpec::Term> t{{2.0, [](double x) { return std::sin(kPi * x); }, [](double y) { return std::sin(kPi * y); }, {}}};
    auto k = KernelSpec::separable(t);
    auto pr = std::const_pointer_cast<IDEProblem>(linear_problem(k, 32));
    pr->scheme = build_spectral_basis(k, GrowthSpec::linear(), pr->grid, 16);
    DiscreteModel rank_one(pr, 16);
    auto f = floquet_spectrum(rank_one);
    c.expect(f.intervals.size() == 1, "rank-one spectrum has " + std::to_string(f.intervals.size()) + " intervals");
    if (f.intervals.size() == 1) {
        c.expect(std::abs(f.intervals[0].lo - 1.0) <= 1e-6 && std::abs(f.intervals[0].hi - 1.0) <= 1e-6,
                 "rank-one spectrum at " + num(f.intervals[0].lo));
    }

    double scan_gap = 0.0;
    auto compare = [&](const SpectrumEstimate& a, const SpectrumEstimate& b, const std::string& what) {
        c.expect(a.intervals.size() == b.intervals.size(), what + ": interval counts differ");
        for (std::size_t i = 0; i < std::min(a.intervals.size(), b.intervals.size()); ++i)
            scan_gap = std::max({scan_gap, std::abs(a.intervals[i].lo - b.intervals[i].lo),
                                 std::abs(a.intervals[i].hi - b.intervals[i].hi)});
    };
    compare(dichotomy_spectrum(rank_one, geometric_grid(0.1, 5.0, 40)), f, "rank-one scan");
    auto periodic = sine_kernel({1.0, 0.4, 0.1}).with_phases(TimeModel::periodic(3), {0.6, 1.3, 2.0});
    DiscreteModel pm(linear_problem(periodic, 32), 16);
    compare(dichotomy_spectrum(pm, geometric_grid(0.01, 5.0, 60)), floquet_spectrum(pm), "periodic scan");
    c.expect(scan_gap <= 2e-3, "scan differs from Floquet by " + num(scan_gap));

    auto d = dichotomy_spectrum(diag_cocycle({0.5, 2.0}), geometric_grid(0.1, 10.0, 40));
    c.expect(d.intervals.size() == 2, "diagonal toy has " + std::to_string(d.intervals.size()) + " intervals");
    double diag_err = 0.0;
    if (d.intervals.size() == 2) {
        const double want[2] = {2.0, 0.5};
        for (int i = 0; i < 2; ++i)
            diag_err = std::max({diag_err, std::abs(d.intervals[i].lo - want[i]), std::abs(d.intervals[i].hi - want[i])});
        c.expect(diag_err <= 1e-3, "diagonal toy endpoints off by " + num(diag_err));
    }
    c.note("rank-one " + (f.intervals.empty() ? std::string("none") : num(f.intervals[0].lo)) + ", scan gap " +
           num(scan_gap) + ", diagonal error " + num(diag_err));
    return c.result();
}

Outcome upper_semicontinuity() {
    Checks c;
    // 2 sin(πx) sin(πy) perturbed by a smooth full-rank kernel.
    auto g = make_grid(0.0, 1.0, 256);
    const auto& x = g->quad_points;
    Eigen::MatrixXd table(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                2.0 * std::sin(kPi * x[i]) * std::sin(kPi * x[j]) + 0.1 * std::exp(-(x[i] - x[j]) * (x[i] - x[j]));
    auto p = std::make_shared<IDEProblem>();
    p->kernel = KernelSpec::tabulated(g, {table});
    p->grid = g;
    p->scheme = ProjectionScheme::piecewise_constant();
    const double floor = 1e-2;
    auto ref = floquet_spectrum(DiscreteModel(p, 256), floor);
    c.expect(!ref.intervals.empty(), "empty reference spectrum");
    double worst = 0.0;
    for (std::size_t n : {32, 64, 128}) {
        auto s = floquet_spectrum(DiscreteModel(p, n), floor);
        for (auto& iv : s.intervals) {
            double dist = kInf;
            for (auto& r : ref.intervals) dist = std::min(dist, std::max({0.0, r.lo - iv.hi, iv.lo - r.hi}));
            worst = std::max(worst, dist);
        }
    }
    c.expect(worst < 0.05, "distance to the reference spectrum " + num(worst));
    c.note(std::to_string(ref.intervals.size()) + " reference intervals above " + num(floor) + ", max distance " +
           num(worst));
    return c.result();
}

Outcome manifold_oracles() {
    Checks c;
    auto saddle = saddle_toy();
    auto split = spectral_splitting(saddle->cocycle(), 1.0);
    const auto coords = line_samples(21, 0.05);
    auto stable = bundle_graph(*saddle, split, {}, 0, Direction::Stable, coords);
    auto unstable = bundle_graph(*saddle, split, {}, 0, Direction::Unstable, coords);
    double es = 0.0, eu = 0.0, ec = 0.0;
    for (auto& s : stable.samples) es = std::max(es, std::abs(s.w(1) + 4.0 / 7.0 * s.base(0) * s.base(0)) + std::abs(s.w(0)));
    for (auto& s : unstable.samples) eu = std::max(eu, s.w.cwiseAbs().maxCoeff());
    c.expect(es <= 1e-4, "stable graph off -4/7 x^2 by " + num(es));
    c.expect(eu <= 1e-6, "unstable graph off zero by " + num(eu));

    auto center = center_toy();
    auto upper = spectral_splitting(center->cocycle(), 1.5);
    auto lower = spectral_splitting(center->cocycle(), 0.75);
    for (auto& y : coords) {
        auto r = center_graph(*center, upper, lower, {}, 0, Eigen::Vector2d(0.0, y(0)));
        ec = std::max(ec, std::abs(r.w(0) - 2.0 * y(0) * y(0)) + std::abs(r.w(1)));
    }
    c.expect(ec <= 1e-4, "center graph off 2y^2 by " + num(ec));
    c.note("max errors stable " + num(es) + ", unstable " + num(eu) + ", center " + num(ec));
    return c.result();
}

Outcome lipschitz_bounds() {
    Checks c;
    const double formula = graph_lipschitz_bound(1.0, 0.01, 0.1, 0.0);
    c.expect(std::abs(formula - 0.125) <= 1e-14, "formula gives " + num(formula));
    std::vector<BundleGraph> graphs;
    auto saddle = saddle_toy();
    auto s1 = spectral_splitting(saddle->cocycle(), 1.0);
    graphs.push_back(bundle_graph(*saddle, s1, {}, 0, Direction::Stable));
    graphs.push_back(bundle_graph(*saddle, s1, {}, 0, Direction::Unstable));
    auto three = three_mode_toy();
    auto hi = spectral_splitting(three->cocycle(), 2.0);
    auto lo = spectral_splitting(three->cocycle(), 0.5);
    graphs.push_back(bundle_graph(*three, hi, {}, 0, Direction::Stable, tensor_grid(2, 5, 0.04)));
    graphs.push_back(bundle_graph(*three, lo, {}, 0, Direction::Unstable, tensor_grid(2, 5, 0.04)));
    graphs.push_back(center_bundle_graph(*three, hi, lo, {}, 0));
    auto cfg = problem_from_json(read_json(IDEBUNDLE_CONFIG_DIR "/toy_pc.json").at("problem"));
    cfg.cells = 64;
    auto model = std::make_shared<DiscreteModel>(build_problem(cfg), 16);
    IDESystem ide(model);
    auto si = spectral_splitting(ide.cocycle(), 1.0);
    graphs.push_back(bundle_graph(ide, si, {}, 0, Direction::Unstable, line_samples(9, 0.02)));
    double worst = 0.0;
    for (auto& g : graphs) {
        auto lc = lipschitz_estimate(g);
        c.expect(lc.pass, direction_name(g.direction) + " graph estimate " + num(lc.estimate) + " above " + num(lc.bound));
        if (lc.bound > 0.0) worst = std::max(worst, lc.estimate / lc.bound);
    }
    c.note("formula " + num(formula) + ", " + std::to_string(graphs.size()) + " graphs, largest estimate/bound " + num(worst));
    return c.result();
}

Outcome convergence_order() {
    Checks c;
    std::string notes;
    for (const char* name : {"toy_pc.json", "toy_pl.json"}) {
        Json cfg = read_json(std::string(IDEBUNDLE_CONFIG_DIR "/") + name);
        StudyConfig study = study_from_json(cfg.at("study"));
        study.problem = problem_from_json(cfg.at("problem"));
        c.expect(study.levels == std::vector<std::size_t>{8, 16, 32, 64} && study.reference_level == 256,
                 std::string(name) + ": unexpected levels");
        c.expect(study.derivative_order >= 1, std::string(name) + ": no derivative field");
        auto rep = run_convergence_study(study);
        if (!rep.fitted_order || !rep.gamma_order || rep.derivative_orders.empty() || !rep.derivative_orders[0]) {
            c.expect(false, std::string(name) + ": orders unavailable");
            continue;
        }
        const double o = *rep.fitted_order, d = *rep.derivative_orders[0], want = *rep.gamma_order;
        c.expect(std::abs(o - want) <= 0.3, rep.scheme + " order " + num(o) + " vs " + num(want));
        c.expect(std::abs(d - want) <= 0.3, rep.scheme + " derivative order " + num(d) + " vs " + num(want));
        c.note(rep.scheme + " order " + num(o) + ", derivative " + num(d) + ", expected " + num(want));
    }
    return c.result();
}

Outcome hierarchy_lattice() {
    Checks c;
    auto sys = three_mode_toy();
    auto hi = spectral_splitting(sys->cocycle(), 2.0);
    auto lo = spectral_splitting(sys->cocycle(), 0.5);
    const auto line = line_samples(100, 0.04);
    const auto plane = tensor_grid(2, 10, 0.04);
    std::vector<BundleGraph> graphs{bundle_graph(*sys, lo, {}, 0, Direction::Stable, line),
                                    bundle_graph(*sys, hi, {}, 0, Direction::Stable, plane),
                                    bundle_graph(*sys, hi, {}, 0, Direction::Unstable, line),
                                    bundle_graph(*sys, lo, {}, 0, Direction::Unstable, plane),
                                    center_bundle_graph(*sys, hi, lo, {}, 0, line)};
    for (auto& g : graphs) c.expect(g.samples.size() == 100, "bundle with " + std::to_string(g.samples.size()) + " points");
    auto rep = hierarchy_check(*sys, graphs);
    std::size_t points = 0, intersections = 0;
    for (auto& item : rep.items) {
        c.expect(item.failures == 0, item.relation + ": " + std::to_string(item.failures) + " failures");
        points += item.points;
        if (item.relation.find("only at 0") != std::string::npos) ++intersections;
    }
    c.expect(intersections == 4, "intersection checks missing");
    c.note(std::to_string(rep.items.size()) + " relations, " + std::to_string(points) + " membership tests, " +
           std::to_string(intersections) + " intersections");
    return c.result();
}

Outcome derivative_consistency() {
    Checks c;
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> xs(0.0, 1.0), zs(-0.6, 0.6);
    const std::vector<GrowthSpec> growths{
        GrowthSpec::linear([](double x) { return 1.0 + x; }),
        GrowthSpec::quadratic(0.7, -1.3),
        GrowthSpec::ricker(1.4),
        GrowthSpec::beverton_holt(2.0, 0.5),
        GrowthSpec::cutoff(GrowthSpec::ricker(0.8), 0.2, [](int, double x) { return 0.5 + 0.1 * x; }),
        GrowthSpec::sum(GrowthSpec::linear(1.0), GrowthSpec::cutoff(GrowthSpec::quadratic(0.0, 2.0), 0.3)),
        GrowthSpec::quadratic(1.0, 0.5).with_phases(TimeModel::periodic(2), {0.8, 1.2})};
    double worst = 0.0;
    auto record = [&](double exact, double fd, const std::string& what) {
        const double rel = std::abs(exact - fd) / std::max(std::abs(fd), 1.0);
        worst = std::max(worst, rel);
        c.expect(rel <= 1e-5, what + " relative error " + num(rel));
    };
    std::size_t checks = 0;
    for (std::size_t gi = 0; gi < growths.size(); ++gi) {
        const auto& g = growths[gi];
        const int top = std::min(g.smoothness(), 3);
        for (int l = 1; l <= top; ++l)
            for (int i = 0; i < 50; ++i) {
                const double x = xs(rng), z = zs(rng), h = 1e-4;
                const int t = i % 2;
                // Five-point central stencil: the cut-off has large higher derivatives.
                auto d = [&](double s) { return g.derivative(t, x, z + s * h, l - 1); };
                const double fd = (d(-2) - 8 * d(-1) + 8 * d(1) - d(2)) / (12 * h);
                record(g.derivative(t, x, z, l), fd, "growth " + std::to_string(gi) + " order " + std::to_string(l));
                ++checks;
            }
    }

    // Operator derivatives in sup norm over the quadrature points.
    auto grid = make_grid(0.0, 1.0, 16);
    const auto k = KernelSpec::laplace(3.0);
    const auto gr = GrowthSpec::ricker(1.2);
    auto sup_rel = [&](const Eigen::MatrixXd& exact, const Eigen::MatrixXd& fd, const std::string& what) {
        const double rel = (exact - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1.0);
        worst = std::max(worst, rel);
        c.expect(rel <= 1e-5, what + " relative error " + num(rel));
        ++checks;
    };
    const double h = 1e-5;
    for (int i = 0; i < 50; ++i) {
        auto u = random_function(grid, rng, 0.8);
        auto v = random_function(grid, rng, 1.0);
        auto w = random_function(grid, rng, 1.0);
        sup_rel(nemytskii_derivative(gr, 0, u, 1, {v}).values(),
                (nemytskii_apply(gr, 0, u + v * h).values() - nemytskii_apply(gr, 0, u - v * h).values()) / (2 * h),
                "Nemytskii first derivative");
        sup_rel(nemytskii_derivative(gr, 0, u, 2, {v, w}).values(),
                (nemytskii_derivative(gr, 0, u + w * h, 1, {v}).values() -
                 nemytskii_derivative(gr, 0, u - w * h, 1, {v}).values()) / (2 * h),
                "Nemytskii second derivative");
        sup_rel(hammerstein_derivative(k, gr, 0, u, 1, {v}).values(),
                (hammerstein_apply(k, gr, 0, u + v * h).values() - hammerstein_apply(k, gr, 0, u - v * h).values()) /
                    (2 * h),
                "Hammerstein first derivative");
        sup_rel(hammerstein_derivative(k, gr, 0, u, 2, {v, w}).values(),
                (hammerstein_derivative(k, gr, 0, u + w * h, 1, {v}).values() -
                 hammerstein_derivative(k, gr, 0, u - w * h, 1, {v}).values()) / (2 * h),
                "Hammerstein second derivative");
    }

    // Linearization of the discretized map at zero.
    auto cfg = problem_from_json(read_json(IDEBUNDLE_CONFIG_DIR "/toy_pc.json").at("problem"));
    cfg.cells = 32;
    DiscreteModel model(build_problem(cfg), 16);
    const Eigen::MatrixXd A = model.linear(0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd e(static_cast<Eigen::Index>(model.dim()));
        for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = 0.01 * normal(rng);
        sup_rel(A * e, (model.apply(0, e * h) - model.apply(0, -e * h)) / (2 * h), "linearization");
    }
    c.note(std::to_string(checks) + " comparisons, worst relative error " + num(worst));
    return c.result();
}

Outcome fixed_point_robustness() {
    Checks c;
    LPConfig cfg;
    const double tol = cfg.fixed_point_tol;
    double rate_change = 0.0, horizon_change = 0.0;
    auto probe = [&](const SemilinearSystem& sys, double gamma, const std::vector<Eigen::VectorXd>& coords) {
        auto a = spectral_splitting(sys.cocycle(), gamma);
        auto b = spectral_splitting(sys.cocycle(), gamma / 2.0);
        c.expect(a.rank == b.rank, "halved rate leaves the gap");
        auto ga = bundle_graph(sys, a, cfg, 0, Direction::Stable, coords);
        auto gb = bundle_graph(sys, b, cfg, 0, Direction::Stable, coords);
        LPConfig twice = cfg;
        twice.horizon = 2 * ga.horizon;
        auto gc = bundle_graph(sys, a, twice, 0, Direction::Stable, coords);
        for (std::size_t i = 0; i < ga.samples.size(); ++i) {
            rate_change = std::max(rate_change, (ga.samples[i].w - gb.samples[i].w).norm());
            horizon_change = std::max(horizon_change, (ga.samples[i].w - gc.samples[i].w).norm());
        }
    };
    auto saddle = saddle_toy();
    probe(*saddle, 1.4, line_samples(11, 0.05));
    auto three = three_mode_toy();
    probe(*three, 0.9, line_samples(11, 0.04));
    probe(*three, 2.8, tensor_grid(2, 5, 0.04));
    c.expect(rate_change < 10 * tol, "rate change moves the graph by " + num(rate_change));
    c.expect(horizon_change < 10 * tol, "horizon doubling moves the graph by " + num(horizon_change));
    c.note("max change under halved rate " + num(rate_change) + ", doubled horizon " + num(horizon_change));
    return c.result();
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;  // 0 when unlimited
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"projection orders", projection_orders, 5.0},
        {"Hille-Tamarkin bound", hille_tamarkin, 0.0},
        {"smoothing constants", smoothing_constants, 0.0},
        {"Floquet and dichotomy spectra", spectra, 10.0},
        {"upper semicontinuity of the spectrum", upper_semicontinuity, 0.0},
        {"stable, unstable and center oracles", manifold_oracles, 0.0},
        {"graph Lipschitz bounds", lipschitz_bounds, 0.0},
        {"bundle convergence order", convergence_order, 60.0},
        {"hierarchy lattice", hierarchy_lattice, 0.0},
        {"derivative consistency", derivative_consistency, 0.0},
        {"fixed-point robustness", fixed_point_robustness, 0.0},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& cr = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.time_limit_s > 0.0 && secs >= cr.time_limit_s) {
            o.pass = false;
            o.detail += "; runtime " + num(secs) + " s exceeds " + num(cr.time_limit_s) + " s";
        }
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, cr.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}

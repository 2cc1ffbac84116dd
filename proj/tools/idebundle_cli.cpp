#include "ide/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

using namespace ide;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    bool verbose = false;
};

Options opts;

void note(const std::string& msg) {
    if (opts.verbose) std::cerr << msg << "\n";
}

std::string out_path(const std::string& name) { return (std::filesystem::path(opts.out) / name).string(); }

void write_json(const std::string& name, const Json& j) { write_text(out_path(name), j.dump(2) + "\n"); }

const Json& section(const Json& cfg, const char* name) {
    static const Json empty = Json::object();
    return cfg.contains(name) ? cfg.at(name) : empty;
}

template <class T>
T value(const Json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

struct Setup {
    Json cfg;
    ProblemPtr problem;
    std::size_t level = 0;
};

Setup load() {
    Setup s;
    s.cfg = read_json(opts.config);
    s.problem = build_problem(problem_from_json(section(s.cfg, "problem")));
    s.level = value<std::size_t>(s.cfg, "level", 32);
    note("problem: scheme " + s.problem->scheme.name() + ", level " + std::to_string(s.level));
    return s;
}

std::string csv_vector(const Eigen::VectorXd& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += "," + format_number(v(i));
    return s;
}

int cmd_simulate() {
    Setup s = load();
    const Json& c = section(s.cfg, "simulate");
    auto init = named_function(value<std::string>(c, "initial", "bump"));
    const double amp = value(c, "amplitude", 0.1);
    const int tau = value(c, "tau", 0);
    const int steps = value(c, "steps", 20);
    auto u0 = GridFunction::sample(s.problem->grid, [&](double x) { return amp * init.f(x); }, s.problem->exponents.p);
    auto traj = solve(*s.problem, tau, u0, tau + steps, s.level);
    const auto& g = *s.problem->grid;
    std::string csv = "x";
    for (int t = traj.start; t <= traj.end(); ++t) csv += ",t" + std::to_string(t);
    csv += "\n";
    for (std::size_t q = 0; q < g.size(); ++q) {
        csv += format_number(g.quad_points[q]);
        for (auto& st : traj.states) csv += "," + format_number(st.values()(0, static_cast<Eigen::Index>(q)));
        csv += "\n";
    }
    write_text(out_path("trajectory.csv"), csv);
    Json norms = Json::array();
    for (auto& st : traj.states) norms.push_back(lp_norm(st));
    write_json("simulate.json", {{"start", traj.start}, {"end", traj.end()}, {"level", s.level}, {"norms", norms}});
    note("simulated " + std::to_string(traj.states.size()) + " states");
    return 0;
}

int cmd_project_error() {
    Setup s = load();
    const Json& c = section(s.cfg, "project_error");
    auto f = named_function(value<std::string>(c, "function", "sine:1"));
    const double p = value(c, "p", s.problem->exponents.p);
    auto levels = value<std::vector<std::size_t>>(c, "levels", {8, 16, 32, 64});
    std::vector<PointFn> derivs;
    if (f.df) derivs.push_back(f.df);
    auto u = GridFunction::sample(s.problem->grid, f.f, p, derivs);
    std::string csv = "level,error\n";
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t n : levels) {
        double e = discretization_error(s.problem->scheme, u, n, p);
        pairs.emplace_back(static_cast<double>(n), e);
        csv += std::to_string(n) + "," + format_number(e) + "\n";
    }
    write_text(out_path("project_error.csv"), csv);
    Json summary = {{"scheme", s.problem->scheme.name()}, {"p", p}};
    try {
        summary["fitted_order"] = fit_order(pairs);
    } catch (const std::invalid_argument&) {
        summary["fitted_order"] = nullptr;
    }
    write_json("project_error.json", summary);
    return 0;
}

int cmd_spectrum() {
    Setup s = load();
    const Json& c = section(s.cfg, "spectrum");
    DiscreteModel model(s.problem, s.level);
    const std::string method = value<std::string>(c, "method", s.problem->period() > 0 ? "floquet" : "scan");
    const double floor = value(c, "floor", 1e-4);
    SpectrumEstimate est;
    if (method == "floquet") {
        est = floquet_spectrum(model, floor);
    } else if (method == "scan") {
        const Json& g = section(c, "grid");
        ScanOptions so;
        so.floor = floor;
        est = dichotomy_spectrum(model, geometric_grid(value(g, "lo", 1e-2), value(g, "hi", 10.0), value<std::size_t>(g, "count", 120)), so);
    } else {
        throw std::invalid_argument("unknown spectrum method '" + method + "'");
    }
    std::string csv = "lo,hi\n";
    for (auto& iv : est.intervals) csv += format_number(iv.lo) + "," + format_number(iv.hi) + "\n";
    write_text(out_path("spectrum.csv"), csv);
    if (!est.resolvent_samples.empty()) {
        std::string rs = "gamma,admissible\n";
        for (auto& [g, ok] : est.resolvent_samples) rs += format_number(g) + "," + (ok ? "1" : "0") + "\n";
        write_text(out_path("resolvent.csv"), rs);
    }
    Json iv = Json::array();
    for (auto& i : est.intervals) iv.push_back({i.lo, i.hi});
    write_json("spectrum.json", {{"method", est.method_name()},
                                 {"level", s.level},
                                 {"intervals", iv},
                                 {"accumulation_floor", est.accumulation_floor ? Json(*est.accumulation_floor) : Json(nullptr)}});
    note("spectral intervals: " + std::to_string(est.intervals.size()));
    return 0;
}

Json graph_summary(const BundleGraph& g) {
    auto lc = lipschitz_estimate(g);
    return {{"direction", direction_name(g.direction)},
            {"tau", g.tau},
            {"gamma", g.gamma},
            {"gamma_lower", g.gamma_lower},
            {"samples", g.samples.size()},
            {"lip_estimate", lc.estimate},
            {"lip_bound", std::isfinite(lc.bound) ? Json(lc.bound) : Json(nullptr)},
            {"lip_pass", lc.pass},
            {"contraction", g.contraction},
            {"K", g.K},
            {"L", g.L},
            {"delta", g.delta},
            {"horizon", g.horizon}};
}

std::string graph_csv(const BundleGraph& g) {
    const Eigen::Index k = g.base_basis.cols();
    const Eigen::Index d = g.base_basis.rows();
    std::vector<std::string> cols;
    for (Eigen::Index i = 0; i < k; ++i) cols.push_back("c" + std::to_string(i));
    for (Eigen::Index i = 0; i < d; ++i) cols.push_back("v" + std::to_string(i));
    for (Eigen::Index i = 0; i < d; ++i) cols.push_back("w" + std::to_string(i));
    cols.push_back("residual");
    std::string csv;
    for (auto& c : cols) csv += (csv.empty() ? "" : ",") + c;
    csv += "\n";
    for (auto& s : g.samples) {
        std::string row = csv_vector(s.coords) + csv_vector(s.base) + csv_vector(s.w) + "," + format_number(s.residual);
        csv += row.substr(1) + "\n";
    }
    return csv;
}

struct BundleInput {
    double radius = 0.0;
    std::size_t per_dim = 9;
};

std::vector<Eigen::VectorXd> grid_for(const BundleInput& in, std::size_t dim, const SemilinearSystem& sys) {
    double r = in.radius > 0.0 ? in.radius : (sys.cutoff_radius() > 0.0 ? sys.cutoff_radius() / 4.0 : 0.05);
    return tensor_grid(dim, in.per_dim, r);
}

// Large fibres are sampled along their leading directions only.
std::vector<Eigen::VectorXd> leading_coords(const Eigen::MatrixXd& fibre, std::size_t max_dim, const BundleInput& in,
                                            const SemilinearSystem& sys) {
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(fibre.cols()), max_dim);
    auto coords = grid_for(in, k, sys);
    for (auto& x : coords) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(fibre.cols());
        full.head(static_cast<Eigen::Index>(k)) = x;
        x = full;
    }
    return coords;
}

int cmd_bundle() {
    Setup s = load();
    const Json& c = section(s.cfg, "bundle");
    auto model = std::make_shared<DiscreteModel>(s.problem, s.level);
    IDESystem sys(model);
    LPConfig lp = lp_from_json(section(c, "lp"));
    const Direction dir = direction_from_string(value<std::string>(c, "direction", "stable"));
    const int tau = value(c, "tau", 0);
    BundleInput in{value(c, "radius", 0.0), value<std::size_t>(c, "per_dim", 9)};
    const double gamma = value(c, "gamma", 1.0);
    auto split = spectral_splitting(sys.cocycle(), gamma);
    audit_level(*s.problem, split, lp, s.level);
    BundleGraph graph;
    if (dir == Direction::Center) {
        auto lower = spectral_splitting(sys.cocycle(), value(c, "gamma_lower", 0.5 * gamma));
        audit_level(*s.problem, lower, lp, s.level);
        auto basis = center_basis(split, lower, tau);
        graph = center_bundle_graph(sys, split, lower, lp, tau, grid_for(in, static_cast<std::size_t>(basis.cols()), sys));
    } else {
        const auto& fibre = dir == Direction::Stable ? split.stable.at(tau) : split.unstable.at(tau);
        auto coords = leading_coords(fibre, value<std::size_t>(c, "max_base_dim", 2), in, sys);
        graph = bundle_graph(sys, split, lp, tau, dir, coords);
    }
    write_text(out_path("graph.csv"), graph_csv(graph));
    write_json("bundle.json", graph_summary(graph));
    note("graph samples: " + std::to_string(graph.samples.size()));
    return 0;
}

int cmd_hierarchy() {
    Setup s = load();
    const Json& c = section(s.cfg, "hierarchy");
    auto model = std::make_shared<DiscreteModel>(s.problem, s.level);
    IDESystem sys(model);
    LPConfig lp = lp_from_json(section(c, "lp"));
    auto rates = value<std::vector<double>>(c, "rates", {2.0, 0.5});
    std::sort(rates.rbegin(), rates.rend());
    const int horizon = value(c, "horizon", 20);
    BundleInput in{value(c, "radius", 0.0), value<std::size_t>(c, "per_dim", 5)};
    const std::size_t max_dim = value<std::size_t>(c, "max_base_dim", 2);
    std::vector<DichotomyData> splits;
    for (double g : rates) {
        splits.push_back(spectral_splitting(sys.cocycle(), g));
        audit_level(*s.problem, splits.back(), lp, s.level);
    }
    auto leading = [&](const Eigen::MatrixXd& fibre) { return leading_coords(fibre, max_dim, in, sys); };
    std::vector<BundleGraph> graphs;
    for (auto& sp : splits) {
        graphs.push_back(bundle_graph(sys, sp, lp, 0, Direction::Stable, leading(sp.stable.at(0))));
        graphs.push_back(bundle_graph(sys, sp, lp, 0, Direction::Unstable, leading(sp.unstable.at(0))));
    }
    for (std::size_t i = 0; i + 1 < splits.size(); ++i) {
        auto basis = center_basis(splits[i], splits[i + 1], 0);
        if (basis.cols() == 0) continue;
        graphs.push_back(center_bundle_graph(sys, splits[i], splits[i + 1], lp, 0, leading(basis)));
    }
    auto rep = hierarchy_check(sys, graphs, horizon);
    Json items = Json::array();
    for (auto& it : rep.items) items.push_back({{"relation", it.relation}, {"points", it.points}, {"failures", it.failures}});
    Json gs = Json::array();
    for (auto& g : graphs) gs.push_back(graph_summary(g));
    write_json("hierarchy.json", {{"level", s.level}, {"all_pass", rep.all_pass}, {"items", items}, {"graphs", gs}});
    note(std::string("hierarchy ") + (rep.all_pass ? "passes" : "fails"));
    return 0;
}

int cmd_converge() {
    Json cfg = read_json(opts.config);
    StudyConfig study = study_from_json(section(cfg, "study"));
    if (cfg.contains("problem") && !section(cfg, "study").contains("problem")) study.problem = problem_from_json(cfg.at("problem"));
    note("study: levels " + Json(study.levels).dump() + " against reference level " + std::to_string(study.reference_level));
    auto rep = run_convergence_study(study);
    emit_report(rep, {out_path("convergence.csv"), out_path("convergence.json"), out_path("timing.json")});
    note("fitted order " + (rep.fitted_order ? format_number(*rep.fitted_order) : std::string("n/a")) + " in " +
         format_number(rep.runtime_s) + " s");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Invariant bundles and dichotomy spectra of discretized integrodifference equations"};
    app.require_subcommand(1);
    const std::map<std::string, std::pair<std::string, int (*)()>> commands{
        {"simulate", {"Iterate the discretized equation from an initial state", cmd_simulate}},
        {"project-error", {"Projection error of a function over levels, with fitted order", cmd_project_error}},
        {"spectrum", {"Floquet or scanned dichotomy spectrum at one level", cmd_spectrum}},
        {"bundle", {"Sampled stable, unstable or center graph at one level", cmd_bundle}},
        {"hierarchy", {"Bundles for a list of rates and their inclusion lattice", cmd_hierarchy}},
        {"converge", {"Convergence study of bundle graphs against a reference level", cmd_converge}},
    };
    std::map<CLI::App*, int (*)()> handlers;
    for (auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", opts.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "Output directory");
        sub->add_flag("--verbose", opts.verbose, "Progress messages on stderr");
        handlers[sub] = entry.second;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        std::filesystem::create_directories(opts.out);
        for (auto& [sub, fn] : handlers)
            if (sub->parsed()) return fn();
    } catch (const AuditFailure& e) {
        std::cerr << "audit failure: " << e.what() << "\n";
        return 2;
    } catch (const SmallnessViolation& e) {
        std::cerr << "audit failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

#include "ide/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ide {

namespace {

const double kPi = std::acos(-1.0);

double parameter(const std::string& name, const std::string& head, double fallback) {
    if (name.size() == head.size()) return fallback;
    if (name[head.size()] != ':') throw std::invalid_argument("unknown function '" + name + "'");
    try {
        std::size_t used = 0;
        const std::string rest = name.substr(head.size() + 1);
        double v = std::stod(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(rest);
        return v;
    } catch (const std::logic_error&) {
        throw std::invalid_argument("bad parameter in function '" + name + "'");
    }
}

bool starts(const std::string& s, const std::string& head) {
    return s.compare(0, head.size(), head) == 0 && (s.size() == head.size() || s[head.size()] == ':');
}

template <class T>
void get(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

NamedFunction named_function(const std::string& name) {
    const double r2 = std::sqrt(2.0);
    if (starts(name, "sine")) {
        const double k = parameter(name, "sine", 1.0);
        return {[=](double x) { return r2 * std::sin(k * kPi * x); }, [=](double x) { return r2 * k * kPi * std::cos(k * kPi * x); }};
    }
    if (starts(name, "cosine")) {
        const double k = parameter(name, "cosine", 1.0);
        return {[=](double x) { return r2 * std::cos(k * kPi * x); }, [=](double x) { return -r2 * k * kPi * std::sin(k * kPi * x); }};
    }
    if (starts(name, "exp")) {
        const double c = parameter(name, "exp", 1.0);
        return {[=](double x) { return std::exp(c * x); }, [=](double x) { return c * std::exp(c * x); }};
    }
    if (starts(name, "const")) {
        const double c = parameter(name, "const", 1.0);
        return {[=](double) { return c; }, [](double) { return 0.0; }};
    }
    if (starts(name, "power")) {
        const double r = parameter(name, "power", 1.0);
        if (r < 0.0) throw std::invalid_argument("power function needs a nonnegative exponent");
        NamedFunction out{[=](double x) { return std::pow(x, r); }, {}};
        if (r >= 1.0) out.df = [=](double x) { return r * std::pow(x, r - 1.0); };
        return out;
    }
    if (name == "bump") {
        return {[](double x) { return std::pow(std::sin(kPi * x), 2); }, [](double x) { return kPi * std::sin(2.0 * kPi * x); }};
    }
    throw std::invalid_argument("unknown function '" + name + "'");
}

TimeModel time_model(const ProblemConfig::Time& t) {
    if (t.kind == "autonomous") return TimeModel::autonomous();
    if (t.kind == "periodic") return TimeModel::periodic(t.period);
    if (t.kind == "window") return TimeModel::window(t.t_min);
    throw std::invalid_argument("unknown time model '" + t.kind + "'");
}

ProblemPtr build_problem(const ProblemConfig& cfg) {
    auto p = std::make_shared<IDEProblem>();
    const TimeModel time = time_model(cfg.time);
    const auto& k = cfg.kernel;
    if (k.type == "laplace") {
        p->kernel = KernelSpec::laplace(k.delta);
    } else if (k.type == "root_exp") {
        p->kernel = KernelSpec::root_exp(k.delta, k.alpha);
    } else if (k.type == "gaussian") {
        p->kernel = KernelSpec::gaussian(k.sigma);
    } else if (k.type == "constant") {
        p->kernel = KernelSpec::constant(k.c);
    } else if (k.type == "separable") {
        if (k.terms.empty()) throw std::invalid_argument("separable kernel needs terms");
        std::vector<KernelSpec::Term> terms;
        for (auto& t : k.terms) {
            auto a = named_function(t.a);
            terms.push_back({t.weight, a.f, named_function(t.b).f, a.df});
        }
        p->kernel = KernelSpec::separable(std::move(terms));
    } else {
        throw std::invalid_argument("unknown kernel type '" + k.type + "'");
    }
    if (!k.phases.empty()) p->kernel = p->kernel.with_phases(time, k.phases);

    const auto& g = cfg.growth;
    if (g.type == "linear") {
        p->growth = GrowthSpec::linear(g.a);
        if (!g.phases.empty()) p->growth = p->growth.with_phases(time, g.phases);
    } else if (g.type == "quadratic") {
        if (g.cutoff > 0.0) {
            GrowthSpec lin = GrowthSpec::linear(g.a);
            if (!g.phases.empty()) lin = lin.with_phases(time, g.phases);
            p->growth = GrowthSpec::sum(lin, GrowthSpec::cutoff(GrowthSpec::quadratic(0.0, g.b), g.cutoff));
        } else {
            p->growth = GrowthSpec::quadratic(g.a, g.b);
            if (!g.phases.empty()) p->growth = p->growth.with_phases(time, g.phases);
        }
    } else if (g.type == "ricker" || g.type == "beverton_holt") {
        GrowthSpec base = g.type == "ricker" ? GrowthSpec::ricker(g.r) : GrowthSpec::beverton_holt(g.a, g.b);
        if (!g.phases.empty()) base = base.with_phases(time, g.phases);
        p->growth = g.cutoff > 0.0 ? GrowthSpec::cutoff(base, g.cutoff) : base;
    } else {
        throw std::invalid_argument("unknown growth type '" + g.type + "'");
    }

    p->exponents = ExponentConfig::make(cfg.p, cfg.q, cfg.m);
    p->grid = make_grid(cfg.a, cfg.b, cfg.cells, cfg.order);
    MeshFamily mesh;
    mesh.C = cfg.mesh_C;
    if (cfg.scheme == "piecewise_constant") {
        p->scheme = ProjectionScheme::piecewise_constant(mesh);
    } else if (cfg.scheme == "piecewise_linear") {
        p->scheme = ProjectionScheme::piecewise_linear(mesh);
    } else if (cfg.scheme == "spectral") {
        const int t0 = cfg.time.kind == "window" ? cfg.time.t_min : 0;
        p->scheme = build_spectral_basis(p->kernel, p->growth, p->grid, cfg.spectral_max, t0);
    } else {
        throw std::invalid_argument("unknown scheme '" + cfg.scheme + "'");
    }
    return p;
}

ProblemConfig problem_from_json(const Json& j) {
    ProblemConfig c;
    if (j.contains("kernel")) {
        const Json& k = j.at("kernel");
        get(k, "type", c.kernel.type);
        get(k, "delta", c.kernel.delta);
        get(k, "alpha", c.kernel.alpha);
        get(k, "sigma", c.kernel.sigma);
        get(k, "c", c.kernel.c);
        get(k, "phases", c.kernel.phases);
        if (k.contains("terms"))
            for (auto& t : k.at("terms")) {
                ProblemConfig::Term term;
                get(t, "weight", term.weight);
                get(t, "a", term.a);
                get(t, "b", term.b);
                c.kernel.terms.push_back(term);
            }
    }
    if (j.contains("growth")) {
        const Json& g = j.at("growth");
        get(g, "type", c.growth.type);
        get(g, "a", c.growth.a);
        get(g, "b", c.growth.b);
        get(g, "r", c.growth.r);
        get(g, "cutoff", c.growth.cutoff);
        get(g, "phases", c.growth.phases);
    }
    if (j.contains("time")) {
        const Json& t = j.at("time");
        get(t, "kind", c.time.kind);
        get(t, "period", c.time.period);
        get(t, "t_min", c.time.t_min);
    }
    if (j.contains("exponents")) {
        const Json& e = j.at("exponents");
        get(e, "p", c.p);
        get(e, "q", c.q);
        get(e, "m", c.m);
    }
    if (j.contains("habitat")) {
        const Json& h = j.at("habitat");
        get(h, "a", c.a);
        get(h, "b", c.b);
        get(h, "cells", c.cells);
        get(h, "order", c.order);
    }
    get(j, "scheme", c.scheme);
    get(j, "mesh_C", c.mesh_C);
    get(j, "spectral_max", c.spectral_max);
    return c;
}

Json to_json(const ProblemConfig& c) {
    Json terms = Json::array();
    for (auto& t : c.kernel.terms) terms.push_back({{"weight", t.weight}, {"a", t.a}, {"b", t.b}});
    return {
        {"kernel", {{"type", c.kernel.type}, {"delta", c.kernel.delta}, {"alpha", c.kernel.alpha}, {"sigma", c.kernel.sigma},
                    {"c", c.kernel.c}, {"terms", terms}, {"phases", c.kernel.phases}}},
        {"growth", {{"type", c.growth.type}, {"a", c.growth.a}, {"b", c.growth.b}, {"r", c.growth.r},
                    {"cutoff", c.growth.cutoff}, {"phases", c.growth.phases}}},
        {"time", {{"kind", c.time.kind}, {"period", c.time.period}, {"t_min", c.time.t_min}}},
        {"exponents", {{"p", c.p}, {"q", c.q}, {"m", c.m}}},
        {"habitat", {{"a", c.a}, {"b", c.b}, {"cells", c.cells}, {"order", c.order}}},
        {"scheme", c.scheme},
        {"mesh_C", c.mesh_C},
        {"spectral_max", c.spectral_max},
    };
}

LPConfig lp_from_json(const Json& j, LPConfig c) {
    get(j, "gamma", c.gamma);
    get(j, "delta", c.delta);
    get(j, "theta", c.theta);
    get(j, "L_bar", c.L_bar);
    get(j, "horizon", c.horizon);
    get(j, "fixed_point_tol", c.fixed_point_tol);
    get(j, "max_iter", c.max_iter);
    get(j, "radius", c.radius);
    return c;
}

Json to_json(const LPConfig& c) {
    return {{"gamma", c.gamma},   {"delta", c.delta},
            {"theta", c.theta},   {"L_bar", c.L_bar},
            {"horizon", c.horizon}, {"fixed_point_tol", c.fixed_point_tol},
            {"max_iter", c.max_iter}, {"radius", c.radius}};
}

Direction direction_from_string(const std::string& s) {
    if (s == "stable") return Direction::Stable;
    if (s == "unstable") return Direction::Unstable;
    if (s == "center") return Direction::Center;
    throw std::invalid_argument("unknown direction '" + s + "'");
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("config '" + path + "': " + e.what());
    }
}

}  // namespace ide

#include "ide/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <memory>

namespace ide {

namespace {

using Clock = std::chrono::steady_clock;

// Normalized errors below this are rounding noise of the fixed-point solve.
constexpr double kRoundingFloor = 1e-13;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class T>
void get(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

Json optional_number(const std::optional<double>& v) { return v && std::isfinite(*v) ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::optional<double> fit_if_possible(const std::vector<std::size_t>& levels, const std::vector<double>& errors) {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < levels.size(); ++i) pairs.emplace_back(static_cast<double>(levels[i]), errors[i]);
    try {
        return fit_order(pairs);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

std::optional<GammaModel> gamma_model(const IDEProblem& problem, const ProblemConfig& cfg) {
    using K = ProjectionScheme::Kind;
    GammaModel m;
    m.scheme = problem.scheme.kind();
    if (m.scheme == K::PiecewiseConstant) {
        m.space = SmoothingSpace::w1p();
    } else if (m.scheme == K::PiecewiseLinear) {
        m.space = SmoothingSpace::sobolev(2);
    } else {
        return std::nullopt;
    }
    m.C = cfg.mesh_C;
    m.length = cfg.b - cfg.a;
    m.p = cfg.p;
    return m;
}

// Graph values on the shared quadrature grid along one base direction.
struct Sample {
    Eigen::VectorXd base;                // state of the unit base vector
    std::vector<Eigen::VectorXd> w;      // states of w at s - h, s, s + h (or s only)
    double s = 0.0;
};

struct LevelData {
    LevelResult result;
    std::vector<Sample> samples;
};

Eigen::VectorXd state_of(const DiscreteModel& model, const Eigen::VectorXd& y) {
    return model.synthesis() * model.from_ortho(y);
}

LevelData compute_level(const StudyConfig& cfg, const ProblemPtr& problem, std::size_t n,
                        const std::vector<Eigen::VectorXd>* reference_bases) {
    const auto t0 = Clock::now();
    LevelData out;
    out.result.level = n;
    auto model = std::make_shared<DiscreteModel>(problem, n);
    IDESystem sys(model);
    DichotomyData split = spectral_splitting(sys.cocycle(), cfg.gamma);
    out.result.K = split.K;
    out.result.alpha = split.alpha;
    out.result.beta = split.beta;
    if (cfg.audit) audit_level(*problem, split, cfg.lp, n);
    out.result.audit_passed = true;

    const double rho = problem->growth.cutoff_radius();
    const double h = cfg.fd_step * (rho > 0.0 ? rho : 1.0);
    std::vector<double> offsets{0.0};
    if (cfg.derivative_order > 0) offsets = {-h, 0.0, h};

    std::size_t k = 0;
    for (int tau : cfg.taus) {
        const Eigen::MatrixXd& fibre = cfg.direction == Direction::Stable ? split.stable.at(tau) : split.unstable.at(tau);
        if (static_cast<std::size_t>(fibre.cols()) < cfg.base_columns)
            throw std::invalid_argument("study: level " + std::to_string(n) + " fibre has fewer than " +
                                        std::to_string(cfg.base_columns) + " basis vectors");
        for (std::size_t c = 0; c < cfg.base_columns; ++c) {
            Eigen::VectorXd e = fibre.col(static_cast<Eigen::Index>(c));
            Eigen::VectorXd E = state_of(*model, e);
            if (reference_bases) {
                const Eigen::VectorXd& ref = (*reference_bases)[k];
                if ((E.array() * ref.array() * problem->grid->weights().array()).sum() < 0.0) {
                    e = -e;
                    E = -E;
                }
            }
            for (double s : cfg.amplitudes) {
                Sample smp;
                smp.base = E;
                smp.s = s;
                for (double off : offsets) {
                    auto r = lp_fixed_point(sys, split, cfg.lp, tau, (s + off) * e, cfg.direction);
                    smp.w.push_back(state_of(*model, r.w));
                }
                out.samples.push_back(std::move(smp));
            }
            ++k;
        }
    }
    out.result.runtime_s = seconds_since(t0);
    return out;
}

std::vector<Eigen::VectorXd> sample_fields(const Sample& s, int order, double h) {
    std::vector<Eigen::VectorXd> f;
    if (s.w.size() == 1) {
        f.push_back(s.w[0]);
        return f;
    }
    f.push_back(s.w[1]);
    if (order >= 1) f.push_back((s.w[2] - s.w[0]) / (2.0 * h));
    if (order >= 2) f.push_back((s.w[2] - 2.0 * s.w[1] + s.w[0]) / (h * h));
    return f;
}

double norm_p(const Habitat1D& g, const Eigen::VectorXd& v, double p) { return lp_norm(g, v.transpose(), p); }

}  // namespace

AuditReport audit_level(const IDEProblem& problem, const DichotomyData& split, const LPConfig& cfg, std::size_t level) {
    AuditInput in;
    in.K = split.K;
    in.alpha = split.alpha;
    in.beta = split.beta;
    if (cfg.delta > 0.0) in.delta = cfg.delta;
    AuditReport rep = hypothesis_audit(problem.kernel, problem.growth, problem.exponents, *problem.grid, in);
    if (!rep.passed) {
        std::string what;
        for (auto& f : rep.failures) what += (what.empty() ? "" : "; ") + f;
        throw AuditFailure(level, what.empty() ? "unspecified" : what);
    }
    return rep;
}

void StudyConfig::validate() const {
    if (levels.empty()) throw std::invalid_argument("study: no levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == 0) throw std::invalid_argument("study: levels must be positive");
        if (i > 0 && levels[i] <= levels[i - 1]) throw std::invalid_argument("study: levels must ascend");
    }
    if (reference_level <= levels.back())
        throw std::invalid_argument("study: reference level must exceed every study level");
    if (direction == Direction::Center) throw std::invalid_argument("study: center bundles need two rates");
    if (!(gamma > 0.0)) throw std::invalid_argument("study: gamma must be positive");
    if (taus.empty() || amplitudes.empty()) throw std::invalid_argument("study: need sample fibres and amplitudes");
    for (double a : amplitudes)
        if (!(a > 0.0)) throw std::invalid_argument("study: amplitudes must be positive");
    if (base_columns == 0) throw std::invalid_argument("study: need at least one base column");
    if (derivative_order < 0 || derivative_order > 2) throw std::invalid_argument("study: derivative order must be 0, 1 or 2");
    if (!(fd_step > 0.0)) throw std::invalid_argument("study: finite-difference step must be positive");
}

StudyConfig study_from_json(const Json& j) {
    StudyConfig c;
    if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"));
    get(j, "levels", c.levels);
    get(j, "reference_level", c.reference_level);
    get(j, "gamma", c.gamma);
    if (j.contains("direction")) c.direction = direction_from_string(j.at("direction").get<std::string>());
    if (j.contains("lp")) c.lp = lp_from_json(j.at("lp"));
    get(j, "taus", c.taus);
    get(j, "amplitudes", c.amplitudes);
    get(j, "base_columns", c.base_columns);
    get(j, "derivative_order", c.derivative_order);
    get(j, "fd_step", c.fd_step);
    get(j, "audit", c.audit);
    return c;
}

Json to_json(const StudyConfig& c) {
    return {{"problem", to_json(c.problem)},
            {"levels", c.levels},
            {"reference_level", c.reference_level},
            {"gamma", c.gamma},
            {"direction", direction_name(c.direction)},
            {"lp", to_json(c.lp)},
            {"taus", c.taus},
            {"amplitudes", c.amplitudes},
            {"base_columns", c.base_columns},
            {"derivative_order", c.derivative_order},
            {"fd_step", c.fd_step},
            {"audit", c.audit}};
}

ConvergenceReport run_convergence_study(const StudyConfig& cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    ProblemPtr problem = build_problem(cfg.problem);
    ConvergenceReport rep;
    rep.scheme = problem->scheme.name();
    rep.direction = direction_name(cfg.direction);
    rep.gamma = cfg.gamma;
    rep.reference_level = cfg.reference_level;

    LevelData ref = compute_level(cfg, problem, cfg.reference_level, nullptr);
    std::vector<Eigen::VectorXd> ref_bases;
    for (std::size_t i = 0; i < ref.samples.size(); i += cfg.amplitudes.size()) ref_bases.push_back(ref.samples[i].base);

    std::vector<std::future<LevelData>> jobs;
    for (std::size_t n : cfg.levels)
        jobs.push_back(std::async(std::launch::async, compute_level, std::cref(cfg), std::cref(problem), n, &ref_bases));
    std::vector<LevelData> data;
    for (auto& j : jobs) data.push_back(j.get());

    const Habitat1D& g = *problem->grid;
    const double p = problem->exponents.p;
    const double rho = problem->growth.cutoff_radius();
    const double h = cfg.fd_step * (rho > 0.0 ? rho : 1.0);
    const int orders = cfg.derivative_order;
    auto gm = gamma_model(*problem, cfg.problem);
    for (auto& d : data) {
        LevelResult r = d.result;
        r.derivative_errors.assign(static_cast<std::size_t>(orders), 0.0);
        for (std::size_t i = 0; i < d.samples.size(); ++i) {
            const Sample& s = d.samples[i];
            auto fn = sample_fields(s, orders, h);
            auto fr = sample_fields(ref.samples[i], orders, h);
            const double v = s.s * norm_p(g, s.base, p);
            r.error = std::max(r.error, norm_p(g, fn[0] - fr[0], p) / v);
            for (int l = 1; l <= orders; ++l) {
                auto& e = r.derivative_errors[static_cast<std::size_t>(l - 1)];
                e = std::max(e, norm_p(g, fn[static_cast<std::size_t>(l)] - fr[static_cast<std::size_t>(l)], p) / v);
            }
        }
        if (gm) r.gamma_bound = gamma_bound(*gm, r.level);
        rep.levels.push_back(std::move(r));
    }

    std::vector<double> errors;
    for (auto& r : rep.levels) errors.push_back(r.error);
    rep.exact = std::all_of(errors.begin(), errors.end(), [](double e) { return e < kRoundingFloor; });
    if (!rep.exact) rep.fitted_order = fit_if_possible(cfg.levels, errors);
    for (int l = 0; l < orders; ++l) {
        std::vector<double> de;
        for (auto& r : rep.levels) de.push_back(r.derivative_errors[static_cast<std::size_t>(l)]);
        rep.derivative_orders.push_back(fit_if_possible(cfg.levels, de));
    }
    if (gm) {
        std::vector<double> gb;
        for (auto& r : rep.levels) gb.push_back(*r.gamma_bound);
        rep.gamma_order = fit_if_possible(cfg.levels, gb);
    }
    if (cfg.audit)
        rep.audit_notes.push_back("hypothesis audit passed at levels " + [&] {
            std::string s;
            for (std::size_t n : cfg.levels) s += std::to_string(n) + ",";
            return s + std::to_string(cfg.reference_level);
        }());
    rep.runtime_s = seconds_since(t0);
    return rep;
}

double fit_order(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<double> xs, ys;
    for (auto& [n, e] : pairs) {
        if (!(n > 0.0)) throw std::invalid_argument("fit_order: levels must be positive");
        if (e > 0.0 && std::isfinite(e)) {
            xs.push_back(std::log(1.0 / n));
            ys.push_back(std::log(e));
        }
    }
    if (xs.size() < 3) throw std::invalid_argument("fit_order: need at least 3 positive errors");
    const double k = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / k;
        my += ys[i] / k;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_order: levels must differ");
    return sxy / sxx;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string report_csv(const ConvergenceReport& report) {
    std::size_t orders = 0;
    for (auto& r : report.levels) orders = std::max(orders, r.derivative_errors.size());
    std::string out = "level,error";
    for (std::size_t l = 1; l <= orders; ++l) out += ",d" + std::to_string(l) + "_error";
    out += ",gamma_bound,K,alpha,beta,audit_passed\n";
    for (auto& r : report.levels) {
        out += std::to_string(r.level) + "," + format_number(r.error);
        for (std::size_t l = 0; l < orders; ++l)
            out += "," + (l < r.derivative_errors.size() ? format_number(r.derivative_errors[l]) : std::string());
        out += "," + (r.gamma_bound ? format_number(*r.gamma_bound) : std::string());
        out += "," + format_number(r.K) + "," + format_number(r.alpha) + "," + format_number(r.beta);
        out += std::string(",") + (r.audit_passed ? "true" : "false") + "\n";
    }
    return out;
}

Json report_json(const ConvergenceReport& report) {
    Json levels = Json::array();
    for (auto& r : report.levels) {
        levels.push_back({{"level", r.level},
                          {"error", r.error},
                          {"derivative_errors", r.derivative_errors},
                          {"gamma_bound", optional_number(r.gamma_bound)},
                          {"K", r.K},
                          {"alpha", r.alpha},
                          {"beta", std::isfinite(r.beta) ? Json(r.beta) : Json(nullptr)},
                          {"audit_passed", r.audit_passed}});
    }
    Json dorders = Json::array();
    for (auto& o : report.derivative_orders) dorders.push_back(optional_number(o));
    return {{"scheme", report.scheme},
            {"direction", report.direction},
            {"gamma", report.gamma},
            {"reference_level", report.reference_level},
            {"levels", levels},
            {"fitted_order", optional_number(report.fitted_order)},
            {"exact", report.exact},
            {"gamma_order", optional_number(report.gamma_order)},
            {"derivative_orders", dorders},
            {"audit_notes", report.audit_notes}};
}

ConvergenceReport report_from_json(const Json& j) {
    ConvergenceReport r;
    r.scheme = j.at("scheme").get<std::string>();
    r.direction = j.at("direction").get<std::string>();
    r.gamma = j.at("gamma").get<double>();
    r.reference_level = j.at("reference_level").get<std::size_t>();
    for (auto& l : j.at("levels")) {
        LevelResult x;
        x.level = l.at("level").get<std::size_t>();
        x.error = l.at("error").get<double>();
        x.derivative_errors = l.at("derivative_errors").get<std::vector<double>>();
        x.gamma_bound = optional_from(l.at("gamma_bound"));
        x.K = l.at("K").get<double>();
        x.alpha = l.at("alpha").get<double>();
        x.beta = l.at("beta").is_null() ? std::numeric_limits<double>::infinity() : l.at("beta").get<double>();
        x.audit_passed = l.at("audit_passed").get<bool>();
        r.levels.push_back(std::move(x));
    }
    r.fitted_order = optional_from(j.at("fitted_order"));
    r.exact = j.at("exact").get<bool>();
    r.gamma_order = optional_from(j.at("gamma_order"));
    for (auto& o : j.at("derivative_orders")) r.derivative_orders.push_back(optional_from(o));
    r.audit_notes = j.at("audit_notes").get<std::vector<std::string>>();
    return r;
}

void write_text(const std::string& path, const std::string& text) {
    std::filesystem::path fp(path);
    std::error_code ec;
    if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void emit_report(const ConvergenceReport& report, const ReportPaths& paths) {
    if (!paths.csv.empty()) write_text(paths.csv, report_csv(report));
    if (!paths.json.empty()) write_text(paths.json, report_json(report).dump(2) + "\n");
    if (!paths.timing.empty()) {
        Json t = {{"total_s", report.runtime_s}, {"levels", Json::array()}};
        for (auto& r : report.levels) t["levels"].push_back({{"level", r.level}, {"runtime_s", r.runtime_s}});
        write_text(paths.timing, t.dump(2) + "\n");
    }
}

}  // namespace ide

#include "ide/bundles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace ide {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double op_norm(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    Eigen::MatrixXd G = A.rows() <= A.cols() ? Eigen::MatrixXd(A * A.transpose()) : Eigen::MatrixXd(A.transpose() * A);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double max_cutoff_slope(double rho) {
    CutoffFunction chi(rho);
    double m = 0.0;
    for (int i = 0; i <= 2000; ++i) m = std::max(m, std::abs(chi.derivative(rho * (1.0 + i / 2000.0), 1)));
    return m;
}

// Lipschitz bound of (χ_ρ(|u|) u_k)^2 on the ball of radius r.
std::function<double(double)> squared_mode_lipschitz(double rho) {
    const double m = max_cutoff_slope(rho);
    return [rho, m](double r) {
        if (r <= rho) return 2.0 * r;
        const double rr = std::min(r, 2.0 * rho);
        return 2.0 * rr * (1.0 + m * rr);
    };
}

LinearCocycle diagonal(const std::vector<double>& d) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) v(static_cast<Eigen::Index>(i)) = d[i];
    return LinearCocycle::periodic({Eigen::MatrixXd(v.asDiagonal())});
}

double weighted_gap(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                    const std::vector<double>& weight) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, weight[i] * (a[i] - b[i]).norm());
    return m;
}

// Least-squares slope of log y against the index.
double log_slope(const std::vector<double>& y) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] > 0.0) {
            xs.push_back(static_cast<double>(i));
            ys.push_back(std::log(y[i]));
        }
    if (xs.size() < 2) return -kInf;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

double effective_delta(const DichotomyData& s, const LPConfig& cfg) {
    if (cfg.delta > 0.0) return cfg.delta;
    return std::min(s.gamma - s.alpha, std::isfinite(s.beta) ? s.beta - s.gamma : kInf);
}

double contraction_factor(const DichotomyData& s, std::size_t dim, double l) {
    double sum = 0.0;
    if (s.rank > 0) sum += 1.0 / (s.gamma - s.alpha);
    if (s.rank < dim) sum += 1.0 / (s.beta - s.gamma);
    return s.K * l * sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// Systems

IDESystem::IDESystem(std::shared_ptr<const DiscreteModel> model) : model_(std::move(model)) {
    if (!model_) throw std::invalid_argument("IDESystem: no model");
    cocycle_ = LinearCocycle::of(*model_);
    const Habitat1D& g = *model_->problem().grid;
    Eigen::VectorXd inv_sqrt_w = g.weights().cwiseSqrt().cwiseInverse();
    for (int t : model_->problem().data_times()) {
        Eigen::MatrixXd A = model_->ortho() * model_->projected_kernel(t) * inv_sqrt_w.asDiagonal();
        kernel_norm_ = std::max(kernel_norm_, op_norm(A));
    }
    // Rows of R S^{-1}: state values of the orthonormal basis.
    Eigen::MatrixXd Q = model_->ortho().transpose().triangularView<Eigen::Lower>().solve(model_->synthesis().transpose());
    sup_factor_ = Q.colwise().norm().maxCoeff();
}

Eigen::VectorXd IDESystem::map(int t, const Eigen::VectorXd& y) const {
    return model_->to_ortho(model_->apply(t, model_->from_ortho(y)));
}

double IDESystem::lipschitz(double radius) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = lip_cache_.find(radius);
        if (it != lip_cache_.end()) return it->second;
    }
    const IDEProblem& pr = model_->problem();
    const Habitat1D& g = *pr.grid;
    double Z = radius * sup_factor_;
    const double rho = pr.growth.cutoff_radius();
    if (rho > 0.0) Z = std::min(Z, 2.2 * rho);
    double lam = 0.0;
    const int samples = 200;
    for (int t : pr.data_times())
        for (double x : g.quad_points) {
            const double s0 = pr.growth.derivative(t, x, 0.0, 1);
            for (int i = 0; i <= samples; ++i) {
                double z = -Z + 2.0 * Z * i / samples;
                lam = std::max(lam, std::abs(pr.growth.derivative(t, x, z, 1) - s0));
            }
        }
    double l = kernel_norm_ * lam;
    std::lock_guard<std::mutex> lock(mutex_);
    lip_cache_[radius] = l;
    return l;
}

SystemPtr saddle_toy(double a, double b, double rho) {
    CutoffFunction chi(rho);
    auto n = [chi](int, const Eigen::VectorXd& u) {
        double psi = chi(u.norm()) * u(0);
        return Eigen::Vector2d(0.0, psi * psi).eval();
    };
    return std::make_shared<ExplicitSystem>(diagonal({a, b}), [n](int t, const Eigen::VectorXd& u) -> Eigen::VectorXd { return n(t, u); },
                                            squared_mode_lipschitz(rho), rho);
}

SystemPtr center_toy(double a, double rho) {
    CutoffFunction chi(rho);
    auto n = [chi](int, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        double psi = chi(u.norm()) * u(1);
        return Eigen::Vector2d(psi * psi, 0.0);
    };
    return std::make_shared<ExplicitSystem>(diagonal({a, 1.0}), n, squared_mode_lipschitz(rho), rho);
}

SystemPtr three_mode_toy(std::vector<double> rates, double eps, double rho) {
    if (rates.size() != 3) throw std::invalid_argument("three_mode_toy: need three rates");
    CutoffFunction chi(rho);
    auto n = [chi, eps](int, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        double c = chi(u.norm());
        return eps * c * c * Eigen::Vector3d(u(1) * u(2), u(0) * u(2), u(0) * u(1));
    };
    const double m = max_cutoff_slope(rho);
    auto lip = [eps, rho, m](double r) {
        const double rr = std::min(r, 2.0 * rho);
        return eps * (std::sqrt(2.0) * rr + (r > rho ? 2.0 * m * rr * rr : 0.0));
    };
    return std::make_shared<ExplicitSystem>(diagonal(rates), n, lip, rho);
}

std::string direction_name(Direction d) {
    switch (d) {
        case Direction::Stable:
            return "stable";
        case Direction::Unstable:
            return "unstable";
        case Direction::Center:
            return "center";
    }
    return "";
}

// ---------------------------------------------------------------------------
// Lyapunov-Perron

int required_horizon(const DichotomyData& s, const LPConfig& cfg) {
    double rho = 0.0;
    if (s.alpha > 0.0) rho = std::max(rho, s.alpha / s.gamma);
    if (std::isfinite(s.beta)) rho = std::max(rho, s.gamma / s.beta);
    if (!(cfg.fixed_point_tol > 0.0)) throw std::invalid_argument("LPConfig: tolerance must be positive");
    if (rho <= 0.0) return 10;
    double steps = std::ceil(std::log(cfg.fixed_point_tol / std::max(1.0, s.K)) / std::log(rho));
    return std::max(10, 2 * static_cast<int>(steps));
}

LPResult lp_fixed_point(const SemilinearSystem& sys, const DichotomyData& split, const LPConfig& cfg_in, int tau,
                        const Eigen::VectorXd& v, Direction direction) {
    if (direction == Direction::Center) throw std::invalid_argument("lp_fixed_point: use center_graph for center bundles");
    const auto d = static_cast<Eigen::Index>(sys.dim());
    if (v.size() != d) throw std::invalid_argument("lp_fixed_point: dimension mismatch");
    LPConfig cfg = cfg_in;
    cfg.gamma = split.gamma;
    const int minimum = required_horizon(split, cfg);
    if (cfg.horizon == 0) cfg.horizon = minimum;
    if (cfg.horizon < minimum)
        throw std::invalid_argument("lp_fixed_point: horizon " + std::to_string(cfg.horizon) +
                                    " is below the tail-truncation minimum " + std::to_string(minimum));
    const bool stable = direction == Direction::Stable;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd& Ptau = split.P(tau);
    const double off = stable ? ((I - Ptau) * v).norm() : (Ptau * v).norm();
    if (off > 1e-8 * std::max(1.0, v.norm()))
        throw std::invalid_argument("lp_fixed_point: base point is not in the " + direction_name(direction) + " fibre");

    const int T = cfg.horizon;
    const int start = stable ? tau : tau - T;
    const auto n = static_cast<std::size_t>(T + 1);
    const double g = split.gamma;
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        int k = stable ? static_cast<int>(i) : T - static_cast<int>(i);  // |t - τ|
        weight[i] = stable ? std::pow(g, -k) : std::pow(g, k);
    }

    // Unstable coordinates: L_t E_t = E_{t+1} B_t.
    std::vector<Eigen::MatrixXd> E(n);
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> B(n - 1);
    const auto r = static_cast<Eigen::Index>(sys.dim() - split.rank);
    for (std::size_t i = 0; i < n; ++i) E[i] = split.unstable.at(start + static_cast<int>(i));
    if (r > 0)
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const int t = start + static_cast<int>(i);
            B[i].compute(E[i + 1].transpose() * sys.cocycle().at(t) * E[i]);
        }

    LPResult res;
    res.horizon = T;
    res.orbit_start = start;
    // The orbit starts at |v| and is bounded by K|v| to first order; the ball is
    // re-checked against the converged orbit.
    double radius = cfg.radius > 0.0 ? cfg.radius : 1.05 * split.K * v.norm();
    // A trivial complement, or the zero base point, has the zero graph.
    const bool trivial = stable ? split.rank == sys.dim() : split.rank == 0;
    if (trivial) {
        res.w = Eigen::VectorXd::Zero(d);
        return res;
    }
    if (v.norm() == 0.0) {
        res.w = Eigen::VectorXd::Zero(d);
        res.orbit.assign(n, Eigen::VectorXd::Zero(d));
        return res;
    }

    auto apply = [&](const std::vector<Eigen::VectorXd>& x) {
        std::vector<Eigen::VectorXd> Nx(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) Nx[i] = sys.nonlinear(start + static_cast<int>(i), x[i]);
        std::vector<Eigen::VectorXd> S(n), u(n), out(n);
        // In the stable case S also carries the linear part Φ(t,τ)v.
        S[0] = stable ? v : Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const int t = start + static_cast<int>(i);
            S[i + 1] = split.P(t + 1) * (sys.cocycle().at(t) * S[i] + Nx[i]);
        }
        if (stable) {
            u[n - 1] = Eigen::VectorXd::Zero(r);
            for (std::size_t i = n - 1; i-- > 0;) {
                const int t = start + static_cast<int>(i);
                Eigen::VectorXd e = E[i + 1].transpose() * ((I - split.P(t + 1)) * Nx[i]);
                u[i] = r > 0 ? Eigen::VectorXd(B[i].solve(u[i + 1] + e)) : Eigen::VectorXd(0);
            }
            for (std::size_t i = 0; i < n; ++i) out[i] = S[i] - E[i] * u[i];
        } else {
            u[n - 1] = E[n - 1].transpose() * v;
            for (std::size_t i = n - 1; i-- > 0;) {
                const int t = start + static_cast<int>(i);
                Eigen::VectorXd e = E[i + 1].transpose() * ((I - split.P(t + 1)) * Nx[i]);
                u[i] = B[i].solve(u[i + 1] - e);
            }
            for (std::size_t i = 0; i < n; ++i) out[i] = E[i] * u[i] + S[i];
        }
        return out;
    };

    // Linear solution as the starting sequence.
    std::vector<Eigen::VectorXd> x(n);
    if (stable) {
        x[0] = v;
        for (std::size_t i = 0; i + 1 < n; ++i)
            x[i + 1] = split.P(start + static_cast<int>(i) + 1) * (sys.cocycle().at(start + static_cast<int>(i)) * x[i]);
    } else {
        Eigen::VectorXd c = E[n - 1].transpose() * v;
        x[n - 1] = v;
        for (std::size_t i = n - 1; i-- > 0;) {
            c = B[i].solve(c);
            x[i] = E[i] * c;
        }
    }

    auto check_contraction = [&](double rad) {
        res.radius = rad;
        res.lipschitz = sys.lipschitz(rad);
        res.contraction = contraction_factor(split, sys.dim(), res.lipschitz);
        if (!(res.contraction < 1.0))
            throw SmallnessViolation("lp_fixed_point: contraction factor " + std::to_string(res.contraction) +
                                     " >= 1 on the ball of radius " + std::to_string(rad) + " (smallness violated)");
    };
    check_contraction(radius);

    double diff = kInf;
    for (res.iterations = 1; res.iterations <= cfg.max_iter; ++res.iterations) {
        auto next = apply(x);
        diff = weighted_gap(next, x, weight);
        x = std::move(next);
        if (diff < cfg.fixed_point_tol) break;
    }
    if (!(diff < cfg.fixed_point_tol))
        throw std::runtime_error("lp_fixed_point: no convergence after " + std::to_string(cfg.max_iter) + " iterations");
    double sup = 0.0;
    for (auto& xi : x) sup = std::max(sup, xi.norm());
    if (sup > radius) check_contraction(sup * 1.01);

    res.residual = weighted_gap(apply(x), x, weight);
    const std::size_t at_tau = stable ? 0 : n - 1;
    res.w = x[at_tau] - v;
    res.orbit = std::move(x);
    return res;
}

// ---------------------------------------------------------------------------
// Graphs

std::vector<Eigen::VectorXd> tensor_grid(std::size_t dim, std::size_t per_dim, double radius) {
    std::vector<Eigen::VectorXd> out;
    if (dim == 0) return {Eigen::VectorXd(0)};
    if (per_dim < 1) throw std::invalid_argument("tensor_grid: need at least one point per dimension");
    std::size_t total = 1;
    for (std::size_t i = 0; i < dim; ++i) {
        total *= per_dim;
        if (total > 1000000) throw std::invalid_argument("tensor_grid: too many points; pass explicit samples");
    }
    auto coord = [&](std::size_t k) {
        return per_dim == 1 ? 0.0 : -radius + 2.0 * radius * static_cast<double>(k) / static_cast<double>(per_dim - 1);
    };
    for (std::size_t idx = 0; idx < total; ++idx) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(dim));
        std::size_t rest = idx;
        for (std::size_t j = 0; j < dim; ++j) {
            c(static_cast<Eigen::Index>(j)) = coord(rest % per_dim);
            rest /= per_dim;
        }
        out.push_back(c);
    }
    return out;
}

namespace {

double default_sample_radius(const SemilinearSystem& sys) {
    double rho = sys.cutoff_radius();
    return rho > 0.0 ? rho / 4.0 : 0.05;
}

// Runs f(0..count-1) on worker threads; results are written by index.
template <class F>
void parallel_for(std::size_t count, F f) {
    const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < count; i += workers) f(i);
        }));
    for (auto& j : jobs) j.get();
}

double pairwise_lipschitz(const std::vector<GraphSample>& samples) {
    double m = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            double dv = (samples[i].base - samples[j].base).norm();
            if (dv > 0.0) m = std::max(m, (samples[i].w - samples[j].w).norm() / dv);
        }
    return m;
}

}  // namespace

BundleGraph bundle_graph(const SemilinearSystem& sys, const DichotomyData& split, const LPConfig& cfg, int tau,
                         Direction direction, std::vector<Eigen::VectorXd> coords) {
    if (direction == Direction::Center) throw std::invalid_argument("bundle_graph: use center_bundle_graph");
    BundleGraph graph;
    graph.tau = tau;
    graph.direction = direction;
    graph.gamma = split.gamma;
    graph.base_basis = direction == Direction::Stable ? split.stable.at(tau) : split.unstable.at(tau);
    const auto k = static_cast<std::size_t>(graph.base_basis.cols());
    if (coords.empty()) coords = tensor_grid(k, 9, default_sample_radius(sys));
    // One common ball for all samples, so the graph has a single Lipschitz bound.
    double reach = 0.0;
    for (auto& c : coords) {
        if (static_cast<std::size_t>(c.size()) != k) throw std::invalid_argument("bundle_graph: sample dimension mismatch");
        reach = std::max(reach, c.norm());
    }
    LPConfig local = cfg;
    if (local.radius <= 0.0) local.radius = 1.05 * split.K * reach;

    graph.samples.resize(coords.size());
    std::vector<LPResult> runs(coords.size());
    parallel_for(coords.size(), [&](std::size_t i) {
        auto& s = graph.samples[i];
        s.coords = coords[i];
        s.base = graph.base_basis * coords[i];
        runs[i] = lp_fixed_point(sys, split, local, tau, s.base, direction);
        s.w = runs[i].w;
        s.residual = runs[i].residual;
    });
    graph.horizon = required_horizon(split, local);
    for (auto& r : runs) {
        graph.contraction = std::max(graph.contraction, r.contraction);
        graph.L = std::max(graph.L, r.lipschitz);
        graph.horizon = std::max(graph.horizon, r.horizon);
    }
    graph.lip_estimate = pairwise_lipschitz(graph.samples);
    graph.K = split.K;
    graph.delta = effective_delta(split, cfg);
    graph.lip_bound = graph_lipschitz_bound(graph.K, graph.L, graph.delta, cfg.theta, cfg.L_bar);
    return graph;
}

Eigen::MatrixXd center_basis(const DichotomyData& upper, const DichotomyData& lower, int tau) {
    const auto d = upper.P(tau).rows();
    const std::size_t dim = upper.rank - lower.rank;
    if (upper.rank < lower.rank) throw std::invalid_argument("center_basis: splittings are not ordered");
    Eigen::MatrixXd A = upper.P(tau) * (Eigen::MatrixXd::Identity(d, d) - lower.P(tau));
    return orthonormal_span(A, dim);
}

CenterResult center_graph(const SemilinearSystem& sys, const DichotomyData& upper, const DichotomyData& lower,
                          const LPConfig& cfg, int tau, const Eigen::VectorXd& v) {
    if (!(lower.gamma < upper.gamma)) throw std::invalid_argument("center_graph: need gamma_lower < gamma_upper");
    const auto d = static_cast<Eigen::Index>(sys.dim());
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    if ((v - upper.P(tau) * (I - lower.P(tau)) * v).norm() > 1e-8 * std::max(1.0, v.norm()))
        throw std::invalid_argument("center_graph: base point is not in the center fibre");

    LPConfig cu = cfg, cl = cfg;
    cu.gamma = upper.gamma;
    cl.gamma = lower.gamma;

    CenterResult res;
    res.stable_part = Eigen::VectorXd::Zero(d);
    res.unstable_part = Eigen::VectorXd::Zero(d);
    double c_plus = 0.0, c_minus = 0.0;
    double diff = kInf;
    for (res.iterations = 1; res.iterations <= cfg.max_iter; ++res.iterations) {
        auto up = lp_fixed_point(sys, upper, cu, tau, v + res.stable_part, Direction::Stable);
        auto lo = lp_fixed_point(sys, lower, cl, tau, v + res.unstable_part, Direction::Unstable);
        // Graph Lipschitz constants from the contraction estimates.
        if (upper.rank < sys.dim())
            c_plus = upper.K * upper.K * up.lipschitz / ((upper.beta - upper.gamma) * (1.0 - up.contraction));
        if (lower.rank > 0)
            c_minus = lower.K * lower.K * lo.lipschitz / ((lower.gamma - lower.alpha) * (1.0 - lo.contraction));
        res.coupling = c_plus * c_minus;
        if (!(res.coupling < 1.0))
            throw SmallnessViolation("center_graph: coupled map is not a contraction (factor " + std::to_string(res.coupling) + ")");
        diff = std::max((up.w - res.unstable_part).norm(), (lo.w - res.stable_part).norm());
        res.unstable_part = up.w;
        res.stable_part = lo.w;
        if (diff < cfg.fixed_point_tol) break;
    }
    if (!(diff < cfg.fixed_point_tol))
        throw std::runtime_error("center_graph: no convergence after " + std::to_string(cfg.max_iter) + " iterations");
    res.w = res.stable_part + res.unstable_part;
    return res;
}

BundleGraph center_bundle_graph(const SemilinearSystem& sys, const DichotomyData& upper, const DichotomyData& lower,
                                const LPConfig& cfg, int tau, std::vector<Eigen::VectorXd> coords) {
    BundleGraph graph;
    graph.tau = tau;
    graph.direction = Direction::Center;
    graph.gamma = upper.gamma;
    graph.gamma_lower = lower.gamma;
    graph.base_basis = center_basis(upper, lower, tau);
    const auto k = static_cast<std::size_t>(graph.base_basis.cols());
    if (coords.empty()) coords = tensor_grid(k, 9, default_sample_radius(sys));
    double reach = 0.0;
    for (auto& c : coords) reach = std::max(reach, c.norm());
    LPConfig local = cfg;
        graph.samples.resize(coords.size());
    std::vector<double> coupling(coords.size(), 0.0);
    parallel_for(coords.size(), [&](std::size_t i) {
        auto& s = graph.samples[i];
        s.coords = coords[i];
        s.base = graph.base_basis * coords[i];
        auto r = center_graph(sys, upper, lower, local, tau, s.base);
        s.w = r.w;
        coupling[i] = r.coupling;
    });
    for (double c : coupling) graph.contraction = std::max(graph.contraction, c);
    // The center graph inherits the weaker of the two gap bounds.
    double sup = 0.0;
    for (auto& smp : graph.samples) sup = std::max(sup, (smp.base + smp.w).norm());
    graph.L = sys.lipschitz(local.radius > 0.0 ? local.radius : 1.05 * sup);
    graph.K = std::max(upper.K, lower.K);
    graph.delta = std::min(effective_delta(upper, cfg), effective_delta(lower, cfg));
    graph.lip_estimate = pairwise_lipschitz(graph.samples);
    graph.lip_bound = graph_lipschitz_bound(graph.K, graph.L, graph.delta, cfg.theta, cfg.L_bar);
    return graph;
}

double graph_lipschitz_bound(double K, double L, double delta, double theta, double L_bar) {
    const double eff = L + std::abs(theta) * L_bar;
    const double denom = delta - 2.0 * K * eff;
    if (!(denom > 0.0)) return kInf;
    return K * K * eff / denom;
}

LipschitzCheck lipschitz_estimate(const BundleGraph& graph) {
    LipschitzCheck c;
    c.estimate = graph.lip_estimate;
    c.bound = graph.lip_bound;
    c.pass = c.estimate <= c.bound * (1.0 + 1e-12) + 1e-15;
    return c;
}

// ---------------------------------------------------------------------------
// Membership and hierarchy

MembershipResult membership_test(const SemilinearSystem& sys, int tau, const Eigen::VectorXd& u, double gamma,
                                 int horizon, Direction direction, const MembershipOptions& opts) {
    if (horizon < 10) throw std::invalid_argument("membership_test: horizon must be at least 10 steps");
    if (direction == Direction::Center) throw std::invalid_argument("membership_test: test stable and unstable separately");
    MembershipResult res;
    const double nu = u.norm();
    if (nu == 0.0) {
        res.member = true;
        return res;
    }
    const double ceiling = opts.ceiling_factor * nu;
    // u lies in the bundle iff the Lyapunov-Perron orbit over its fibre
    // component reproduces u. Iterating the map directly would amplify the
    // complementary modes and drown the test in rounding.
    const bool stable = direction == Direction::Stable;
    DichotomyData split = spectral_splitting(sys.cocycle(), gamma);
    const auto d = static_cast<Eigen::Index>(sys.dim());
    const Eigen::MatrixXd P = split.P(tau);
    Eigen::VectorXd base = stable ? Eigen::VectorXd(P * u) : Eigen::VectorXd((Eigen::MatrixXd::Identity(d, d) - P) * u);
    LPConfig cfg = opts.lp;
    cfg.horizon = std::max(required_horizon(split, cfg), horizon);
    cfg.radius = std::max(cfg.radius, 1.05 * split.K * nu);
    LPResult lp;
    try {
        lp = lp_fixed_point(sys, split, cfg, tau, base, direction);
    } catch (const std::runtime_error& e) {
        res.reason = e.what();
        return res;
    }
    if (lp.orbit.empty()) {
        res.member = true;  // the bundle is the whole space
        return res;
    }
    const Eigen::VectorXd& at_u = stable ? lp.orbit.front() : lp.orbit.back();
    const double mismatch = (at_u - u).norm();
    if (mismatch > opts.match_tol * std::max(1.0, nu)) {
        res.reason = "no " + std::string(stable ? "forward" : "backward") + " solution through the point (mismatch " +
                     std::to_string(mismatch) + ")";
        return res;
    }
    std::vector<double> weighted;
    for (int k = 0; k <= horizon; ++k) {
        const auto i = stable ? static_cast<std::size_t>(k) : lp.orbit.size() - 1 - static_cast<std::size_t>(k);
        weighted.push_back(std::pow(gamma, stable ? -k : k) * lp.orbit[i].norm());
    }
    res.max_weighted = *std::max_element(weighted.begin(), weighted.end());
    res.slope = log_slope(weighted);
    if (!(res.max_weighted <= ceiling)) {
        res.reason = "weighted norm exceeds the ceiling";
        return res;
    }
    if (res.slope > 0.0) {
        res.reason = "weighted norm grows geometrically";
        return res;
    }
    res.member = true;
    return res;
}

HierarchyReport hierarchy_check(const SemilinearSystem& sys, const std::vector<BundleGraph>& graphs, int horizon,
                                const MembershipOptions& opts) {
    HierarchyReport rep;
    auto run = [&](const std::string& relation, const BundleGraph& g, double gamma, Direction dir, bool expect) {
        HierarchyItem item{relation, 0, 0};
        for (auto& s : g.samples) {
            Eigen::VectorXd u = s.base + s.w;
            bool zero = u.norm() == 0.0;
            bool in = membership_test(sys, g.tau, u, gamma, horizon, dir, opts).member;
            ++item.points;
            // Intersections must contain the origin and nothing else.
            bool want = expect || zero;
            if (in != want) ++item.failures;
        }
        if (item.failures) rep.all_pass = false;
        rep.items.push_back(item);
    };
    auto rate = [](double g) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", g);
        return std::string(buf);
    };
    for (auto& g : graphs) {
        if (g.direction == Direction::Center) {
            run("W(" + rate(g.gamma) + "," + rate(g.gamma_lower) + ") in W+(" + rate(g.gamma) + ")", g, g.gamma,
                Direction::Stable, true);
            run("W(" + rate(g.gamma) + "," + rate(g.gamma_lower) + ") in W-(" + rate(g.gamma_lower) + ")", g,
                g.gamma_lower, Direction::Unstable, true);
            continue;
        }
        const bool stable = g.direction == Direction::Stable;
        const std::string self = std::string(stable ? "W+(" : "W-(") + rate(g.gamma) + ")";
        run(self + " members", g, g.gamma, g.direction, true);
        for (auto& h : graphs) {
            if (&h == &g || h.direction != g.direction) continue;
            // Stable bundles grow with the rate, unstable ones shrink.
            bool nested = stable ? h.gamma > g.gamma : h.gamma < g.gamma;
            if (nested) run(self + " in " + (stable ? "W+(" : "W-(") + rate(h.gamma) + ")", g, h.gamma, g.direction, true);
        }
        run(self + " meets " + (stable ? "W-(" : "W+(") + rate(g.gamma) + ") only at 0", g, g.gamma,
            stable ? Direction::Unstable : Direction::Stable, false);
    }
    return rep;
}

}  // namespace ide

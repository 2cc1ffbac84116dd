#include "ide/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ide {

namespace {

bool same_grid(const Habitat1D& a, const Habitat1D& b) {
    return a.size() == b.size() && a.a == b.a && a.b == b.b && a.order == b.order;
}

std::size_t coarse_cell(const Habitat1D& grid, std::size_t n, double x) {
    const double H = grid.length() / static_cast<double>(n);
    double r = std::floor((x - grid.a) / H);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n - 1)));
}

double hat(const Habitat1D& grid, std::size_t n, std::size_t i, double x) {
    const double H = grid.length() / static_cast<double>(n);
    const double node = grid.a + H * static_cast<double>(i);
    double r = 1.0 - std::abs(x - node) / H;
    return r > 0.0 ? r : 0.0;
}

}  // namespace

ProjectionScheme ProjectionScheme::piecewise_constant(MeshFamily mesh) {
    ProjectionScheme s;
    s.kind_ = Kind::PiecewiseConstant;
    s.mesh_ = std::move(mesh);
    return s;
}

ProjectionScheme ProjectionScheme::piecewise_linear(MeshFamily mesh) {
    ProjectionScheme s;
    s.kind_ = Kind::PiecewiseLinear;
    s.mesh_ = std::move(mesh);
    return s;
}

std::string ProjectionScheme::name() const {
    switch (kind_) {
        case Kind::PiecewiseConstant:
            return "piecewise_constant";
        case Kind::PiecewiseLinear:
            return "piecewise_linear";
        case Kind::Spectral:
            return "spectral";
    }
    return "";
}

std::size_t ProjectionScheme::dimension(std::size_t n) const {
    if (n == 0) return 0;
    // Beyond the nonzero part of the spectrum Π_n stays the range projection.
    if (kind_ == Kind::Spectral) return std::min(n, max_level());
    return kind_ == Kind::PiecewiseLinear ? n + 1 : n;
}

std::size_t ProjectionScheme::max_level() const {
    if (kind_ == Kind::Spectral) return static_cast<std::size_t>(eigenvalues_.size());
    return std::numeric_limits<std::size_t>::max();
}

void ProjectionScheme::check_level(const Habitat1D& grid, std::size_t n) const {
    if (n == 0) return;
    if (kind_ == Kind::Spectral) {
        if (!same_grid(grid, *grid_)) throw std::invalid_argument("spectral basis lives on a different grid");
        return;
    }
    if (grid.cells() % n != 0)
        throw std::invalid_argument("level " + std::to_string(n) + " does not nest in the integration grid");
}

double ProjectionScheme::basis(const Habitat1D& grid, std::size_t n, std::size_t i, double x) const {
    check_level(grid, n);
    if (n == 0 || i >= dimension(n)) throw std::out_of_range("basis index out of range");
    switch (kind_) {
        case Kind::PiecewiseConstant:
            return coarse_cell(grid, n, x) == i ? 1.0 : 0.0;
        case Kind::PiecewiseLinear:
            return hat(grid, n, i, x);
        case Kind::Spectral: {
            Eigen::VectorXd r(static_cast<Eigen::Index>(grid_->size()));
            kernel_.row(time_, x, *grid_, r);
            const auto I = static_cast<Eigen::Index>(i);
            return r.dot(slope_weights_.cwiseProduct(eigenfunctions_.col(I))) / eigenvalues_(I);
        }
    }
    return 0.0;
}

Eigen::MatrixXd ProjectionScheme::synthesis(const Habitat1D& grid, std::size_t n) const {
    check_level(grid, n);
    if (n == 0) return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(grid.size()));
    const auto nq = static_cast<Eigen::Index>(grid.size());
    const auto dn = static_cast<Eigen::Index>(dimension(n));
    if (kind_ == Kind::Spectral) return eigenfunctions_.leftCols(dn);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nq, dn);
    for (Eigen::Index q = 0; q < nq; ++q) {
        const double x = grid.quad_points[static_cast<std::size_t>(q)];
        if (kind_ == Kind::PiecewiseConstant) {
            R(q, static_cast<Eigen::Index>(coarse_cell(grid, n, x))) = 1.0;
        } else {
            auto c = coarse_cell(grid, n, x);
            R(q, static_cast<Eigen::Index>(c)) = hat(grid, n, c, x);
            R(q, static_cast<Eigen::Index>(c + 1)) = hat(grid, n, c + 1, x);
        }
    }
    return R;
}

Eigen::MatrixXd ProjectionScheme::analysis(const Habitat1D& grid, std::size_t n) const {
    check_level(grid, n);
    const auto nq = static_cast<Eigen::Index>(grid.size());
    if (n == 0) return Eigen::MatrixXd::Identity(nq, nq);
    const auto dn = static_cast<Eigen::Index>(dimension(n));
    switch (kind_) {
        case Kind::PiecewiseConstant: {
            const double H = grid.length() / static_cast<double>(n);
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dn, nq);
            for (Eigen::Index q = 0; q < nq; ++q)
                A(static_cast<Eigen::Index>(coarse_cell(grid, n, grid.quad_points[static_cast<std::size_t>(q)])), q) =
                    grid.quad_weights[static_cast<std::size_t>(q)] / H;
            return A;
        }
        case Kind::Spectral:
            return eigenfunctions_.leftCols(dn).transpose() * grid.weights().asDiagonal();
        case Kind::PiecewiseLinear:
            break;
    }
    throw std::invalid_argument("interpolation is not a linear map on quadrature values");
}

std::vector<double> ProjectionScheme::nodes(const Habitat1D& grid, std::size_t n) const {
    if (kind_ != Kind::PiecewiseLinear) throw std::invalid_argument("nodes: only the interpolating scheme has nodes");
    check_level(grid, n);
    std::vector<double> xs(n + 1);
    for (std::size_t i = 0; i <= n; ++i) xs[i] = grid.a + grid.length() * static_cast<double>(i) / static_cast<double>(n);
    return xs;
}

Eigen::MatrixXd ProjectionScheme::coefficients(const GridFunction& u, std::size_t n) const {
    const Habitat1D& grid = u.grid();
    check_level(grid, n);
    if (n == 0) return u.values();
    if (kind_ == Kind::PiecewiseLinear) {
        if (!u.has_evaluator())
            throw std::invalid_argument("piecewise-linear interpolation needs a point-evaluable function");
        auto xs = nodes(grid, n);
        Eigen::MatrixXd c(static_cast<Eigen::Index>(u.dim()), static_cast<Eigen::Index>(xs.size()));
        for (std::size_t j = 0; j < u.dim(); ++j)
            for (std::size_t i = 0; i < xs.size(); ++i)
                c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = u.eval(j, xs[i]);
        return c;
    }
    return u.values() * analysis(grid, n).transpose();
}

GridFunction ProjectionScheme::synthesize(const HabitatPtr& grid, const Eigen::MatrixXd& coeffs, std::size_t n,
                                          double p) const {
    check_level(*grid, n);
    if (n == 0) return GridFunction(grid, coeffs, p);
    if (static_cast<std::size_t>(coeffs.cols()) != dimension(n))
        throw std::invalid_argument("synthesize: coefficient count does not match the level");
    const std::size_t d = static_cast<std::size_t>(coeffs.rows());
    switch (kind_) {
        case Kind::PiecewiseConstant:
            return GridFunction::sample(grid, d, [grid, coeffs, n](std::size_t j, double x) {
                return coeffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(coarse_cell(*grid, n, x)));
            }, p);
        case Kind::PiecewiseLinear:
            return GridFunction::sample(grid, d, [grid, coeffs, n](std::size_t j, double x) {
                auto c = coarse_cell(*grid, n, x);
                auto J = static_cast<Eigen::Index>(j);
                return coeffs(J, static_cast<Eigen::Index>(c)) * hat(*grid, n, c, x) +
                       coeffs(J, static_cast<Eigen::Index>(c + 1)) * hat(*grid, n, c + 1, x);
            }, p);
        case Kind::Spectral: {
            const auto dn = static_cast<Eigen::Index>(dimension(n));
            Eigen::MatrixXd values = coeffs * eigenfunctions_.leftCols(dn).transpose();
            // Nyström extension: Σ_i c_i χ_i(x) = k(x,·) · (s ⊙ Σ_i (c_i/μ_i) χ_i).
            Eigen::MatrixXd scaled = coeffs * eigenvalues_.head(dn).cwiseInverse().asDiagonal();
            Eigen::MatrixXd z = (eigenfunctions_.leftCols(dn) * scaled.transpose()).array().colwise() *
                                slope_weights_.array();
            KernelSpec kernel = kernel_;
            int t = time_;
            GridFunction out(grid, values, p);
            return out.with_evaluator([kernel, grid, z, t](std::size_t j, double x) {
                Eigen::VectorXd r(static_cast<Eigen::Index>(grid->size()));
                kernel.row(t, x, *grid, r);
                return r.dot(z.col(static_cast<Eigen::Index>(j)));
            });
        }
    }
    throw std::logic_error("synthesize: unknown scheme");
}

GridFunction project(const ProjectionScheme& scheme, const GridFunction& u, std::size_t n) {
    if (n == 0) return u;
    return scheme.synthesize(u.grid_ptr(), scheme.coefficients(u, n), n, u.p());
}

double discretization_error(const ProjectionScheme& scheme, const GridFunction& u, std::size_t n, double p) {
    if (n == 0) return 0.0;
    return lp_norm(u.without_evaluator() - project(scheme, u, n).without_evaluator(), p);
}

ProjectionScheme build_spectral_basis(const KernelSpec& k, const GrowthSpec& g, const HabitatPtr& grid,
                                      std::size_t n_max, int t) {
    if (!grid) throw std::invalid_argument("build_spectral_basis: null grid");
    if (n_max == 0) throw std::invalid_argument("build_spectral_basis: need at least one eigenfunction");
    const auto nq = static_cast<Eigen::Index>(grid->size());
    const Eigen::MatrixXd K = k.matrix(t, *grid);
    Eigen::VectorXd slope(nq);
    for (Eigen::Index q = 0; q < nq; ++q) slope(q) = g.derivative(t, grid->quad_points[static_cast<std::size_t>(q)], 0.0, 1);
    const Eigen::VectorXd sw = grid->weights().cwiseSqrt();
    Eigen::MatrixXd A = sw.asDiagonal() * K * slope.asDiagonal() * sw.asDiagonal();

    const double scale = A.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw std::runtime_error("build_spectral_basis: degenerate spectrum (zero operator)");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw std::invalid_argument("build_spectral_basis: linearization is not self-adjoint");
    A = 0.5 * (A + A.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw std::runtime_error("build_spectral_basis: eigen-decomposition failed");
    const Eigen::VectorXd& mu = es.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(nq));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(mu(a)) > std::abs(mu(b)); });
    const double top = std::abs(mu(order.front()));
    if (!(top > 0.0)) throw std::runtime_error("build_spectral_basis: degenerate spectrum");

    std::vector<Eigen::Index> keep;
    for (auto i : order) {
        if (keep.size() == n_max || std::abs(mu(i)) <= 1e-10 * top) break;
        keep.push_back(i);
    }

    ProjectionScheme s;
    s.kind_ = ProjectionScheme::Kind::Spectral;
    s.grid_ = grid;
    s.kernel_ = k;
    s.time_ = t;
    s.slope_weights_ = slope.cwiseProduct(grid->weights());
    s.eigenvalues_.resize(static_cast<Eigen::Index>(keep.size()));
    s.eigenfunctions_.resize(nq, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        const auto C = static_cast<Eigen::Index>(c);
        Eigen::VectorXd chi = es.eigenvectors().col(keep[c]).cwiseQuotient(sw);
        // Deterministic sign: positive mean, or positive first significant value.
        double mean = chi.dot(grid->weights());
        double sign = 1.0;
        if (std::abs(mean) > 1e-8) {
            sign = mean > 0 ? 1.0 : -1.0;
        } else {
            const double big = chi.cwiseAbs().maxCoeff();
            for (Eigen::Index q = 0; q < nq; ++q)
                if (std::abs(chi(q)) > 1e-3 * big) {
                    sign = chi(q) > 0 ? 1.0 : -1.0;
                    break;
                }
        }
        s.eigenfunctions_.col(C) = sign * chi;
        s.eigenvalues_(C) = mu(keep[c]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Convergence functions

GammaModel GammaModel::fit(ProjectionScheme::Kind scheme, const std::vector<std::size_t>& levels,
                           const std::vector<double>& errors) {
    if (levels.size() != errors.size()) throw std::invalid_argument("GammaModel::fit: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] > 0 && errors[i] > 0.0) {
            lx.push_back(std::log(1.0 / static_cast<double>(levels[i])));
            ly.push_back(std::log(errors[i]));
        }
    if (lx.size() < 2) throw std::invalid_argument("GammaModel::fit: need two positive errors");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    GammaModel m;
    m.scheme = scheme;
    m.fitted = true;
    m.exponent = sxy / sxx;
    m.coeff = std::exp(my - m.exponent * mx);
    if (!(m.exponent > 0.0)) throw std::runtime_error("GammaModel::fit: errors do not decrease with the level");
    return m;
}

double gamma_bound(const GammaModel& model, std::size_t n) {
    if (n == 0) throw std::invalid_argument("gamma_bound: level must be positive");
    const double rho = 1.0 / static_cast<double>(n);
    if (model.fitted) return model.coeff * std::pow(rho, model.exponent);
    using K = ProjectionScheme::Kind;
    const auto& sp = model.space;
    if (model.scheme == K::PiecewiseConstant && sp.kind == SmoothingSpace::Kind::Sobolev && sp.order == 1)
        return model.C * rho;
    if (model.scheme == K::PiecewiseLinear && sp.kind == SmoothingSpace::Kind::Sobolev)
        return 2.0 * std::pow(model.C * rho, sp.order);
    if (model.scheme == K::PiecewiseLinear && sp.kind == SmoothingSpace::Kind::Hoelder) {
        const double inv_p = std::isinf(model.p) ? 0.0 : 1.0 / model.p;
        return std::pow(model.length, inv_p) * std::pow(static_cast<double>(model.d), inv_p) *
               std::pow(model.C * rho, sp.alpha);
    }
    if (model.scheme == K::Spectral) throw std::invalid_argument("gamma_bound: spectral schemes need a fitted model");
    throw std::invalid_argument("gamma_bound: unsupported scheme/space pairing");
}

void check_corpus_entry(const CorpusEntry& e) {
    if (!e.u.values().allFinite()) throw std::invalid_argument("corpus '" + e.name + "': non-finite values");
    if (e.space.kind == SmoothingSpace::Kind::Hoelder && !e.u.has_evaluator())
        throw std::invalid_argument("corpus '" + e.name + "': Hoelder members must be point-evaluable");
    if (e.space.kind != SmoothingSpace::Kind::Sobolev) return;
    if (e.u.derivative_orders() < e.space.order)
        throw std::invalid_argument("corpus '" + e.name + "': missing derivative data for the Sobolev space");
    // Each derivative must integrate to the increments of the one below it.
    const Habitat1D& g = e.u.grid();
    for (int k = 1; k <= e.space.order; ++k) {
        const Eigen::MatrixXd dv = e.u.derivative_values(k);
        for (std::size_t j = 0; j < e.u.dim(); ++j) {
            double scale = 1.0;
            std::vector<double> at_nodes(g.nodes.size());
            for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                at_nodes[i] = e.u.derivative(j, g.nodes[i], k - 1);
                scale = std::max(scale, std::abs(at_nodes[i]));
            }
            const auto per = static_cast<std::size_t>(g.order);
            for (std::size_t c = 0; c < g.cells(); ++c) {
                double integral = 0.0;
                for (std::size_t q = c * per; q < (c + 1) * per; ++q)
                    integral += g.quad_weights[q] * dv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(q));
                if (std::abs(integral - (at_nodes[c + 1] - at_nodes[c])) > 1e-6 * scale)
                    throw std::invalid_argument("corpus '" + e.name + "': derivative data inconsistent with values");
            }
        }
    }
}

ErrorBoundReport verify_error_bound(const ProjectionScheme& scheme, const GammaModel& model,
                                    const std::vector<CorpusEntry>& corpus, const std::vector<std::size_t>& levels) {
    ErrorBoundReport rep;
    for (auto& e : corpus) {
        check_corpus_entry(e);
        const double norm = e.norm ? *e.norm : space_norm(e.u.with_p(std::isinf(model.p) ? e.u.p() : model.p), e.space);
        for (std::size_t n : levels) {
            ErrorBoundRow row;
            row.name = e.name;
            row.n = n;
            row.h = e.u.grid().length() / static_cast<double>(n);
            row.error = discretization_error(scheme, e.u, n, model.p);
            row.bound = gamma_bound(model, n) * norm;
            row.margin = row.bound - row.error;
            row.pass = row.error <= row.bound * (1.0 + 1e-12) + 1e-14;
            rep.all_pass = rep.all_pass && row.pass;
            rep.rows.push_back(row);
        }
    }
    return rep;
}

}  // namespace ide

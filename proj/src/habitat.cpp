#include "ide/habitat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ide {

void gauss_legendre(int order, std::vector<double>& x, std::vector<double>& w) {
    if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    const auto n = static_cast<std::size_t>(order);
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    if (order == 1) {
        w[0] = 2.0;
        return;
    }
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= order; ++k) {
                double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = order * (z * p1 - p0) / (z * z - 1.0);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute derivative at the converged root.
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= order; ++k) {
            double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = order * (z * p1 - p0) / (z * z - 1.0);
        x[i] = -z;
        x[n - 1 - i] = z;
        double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
}

Habitat1D build_grid(double a, double b, std::size_t n, int order) {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("build_grid: endpoints must be finite");
    if (!(a < b)) throw std::invalid_argument("build_grid: need a < b");
    if (n == 0) throw std::invalid_argument("build_grid: need at least one cell");
    if (order < 1) throw std::invalid_argument("build_grid: quadrature order must be >= 1");

    Habitat1D g;
    g.a = a;
    g.b = b;
    g.order = order;
    g.h = (b - a) / static_cast<double>(n);
    g.nodes.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        g.nodes[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    g.nodes.back() = b;

    std::vector<double> gx, gw;
    gauss_legendre(order, gx, gw);
    g.quad_points.reserve(n * gx.size());
    g.quad_weights.reserve(n * gx.size());
    for (std::size_t i = 0; i < n; ++i) {
        double lo = g.nodes[i], hi = g.nodes[i + 1];
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (std::size_t k = 0; k < gx.size(); ++k) {
            g.quad_points.push_back(mid + half * gx[k]);
            g.quad_weights.push_back(half * gw[k]);
        }
    }
    return g;
}

HabitatPtr make_grid(double a, double b, std::size_t n, int order) {
    return std::make_shared<const Habitat1D>(build_grid(a, b, n, order));
}

std::size_t Habitat1D::cell_of(double x) const {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::ptrdiff_t i = (it - nodes.begin()) - 1;
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(cells()) - 1);
    return static_cast<std::size_t>(i);
}

MeshFamily MeshFamily::uniform(double length, std::vector<std::size_t> levels) {
    if (!(length > 0)) throw std::invalid_argument("MeshFamily: length must be positive");
    return MeshFamily{length, std::move(levels)};
}

bool MeshFamily::admits(double length, std::size_t n) const {
    if (n == 0) return true;
    return width(length, n) <= C / static_cast<double>(n) * (1.0 + 1e-12);
}

SmoothingSpace SmoothingSpace::sobolev(int l) {
    if (l < 1 || l > 2) throw std::invalid_argument("SmoothingSpace: Sobolev order must be 1 or 2");
    return {Kind::Sobolev, l, 1.0};
}

SmoothingSpace SmoothingSpace::hoelder(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("SmoothingSpace: Hoelder exponent must lie in (0,1]");
    return {Kind::Hoelder, 1, alpha};
}

// ---------------------------------------------------------------------------
// GridFunction

GridFunction::GridFunction(HabitatPtr grid, Eigen::MatrixXd values, double p)
    : grid_(std::move(grid)), values_(std::move(values)), p_(p) {
    if (!grid_) throw std::invalid_argument("GridFunction: null grid");
    if (values_.rows() < 1) throw std::invalid_argument("GridFunction: need at least one component");
    if (static_cast<std::size_t>(values_.cols()) != grid_->size())
        throw std::invalid_argument("GridFunction: values do not match quadrature points");
    if (!(p_ >= 1.0)) throw std::invalid_argument("GridFunction: exponent p must be >= 1");
}

GridFunction GridFunction::sample(HabitatPtr grid, const PointFn& f, double p,
                                  std::vector<PointFn> derivatives) {
    std::vector<Evaluator> ds;
    for (auto& d : derivatives) ds.push_back([d](std::size_t, double x) { return d(x); });
    return sample(std::move(grid), 1, [f](std::size_t, double x) { return f(x); }, p, std::move(ds));
}

GridFunction GridFunction::sample(HabitatPtr grid, std::size_t dim, Evaluator f, double p,
                                  std::vector<Evaluator> derivatives) {
    if (!grid) throw std::invalid_argument("GridFunction::sample: null grid");
    Eigen::MatrixXd v(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(grid->size()));
    for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t i = 0; i < grid->size(); ++i)
            v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = f(j, grid->quad_points[i]);
    GridFunction u(grid, std::move(v), p);
    u.eval_ = std::move(f);
    u.derivs_ = std::move(derivatives);
    return u;
}

GridFunction GridFunction::zero(HabitatPtr grid, std::size_t dim, double p) {
    return sample(std::move(grid), dim, [](std::size_t, double) { return 0.0; }, p,
                  {[](std::size_t, double) { return 0.0; }, [](std::size_t, double) { return 0.0; }});
}

GridFunction GridFunction::constant(HabitatPtr grid, double c, double p) {
    return sample(std::move(grid), 1, [c](std::size_t, double) { return c; }, p,
                  {[](std::size_t, double) { return 0.0; }, [](std::size_t, double) { return 0.0; }});
}

int GridFunction::derivative_orders() const {
    return static_cast<int>(std::max(derivs_.size(), deriv_values_.size()));
}

double GridFunction::reconstruct(std::size_t comp, double x) const {
    const auto& xs = grid_->quad_points;
    const auto row = static_cast<Eigen::Index>(comp);
    if (xs.size() == 1) return values_(row, 0);
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t j = static_cast<std::size_t>(it - xs.begin());
    j = std::clamp<std::size_t>(j, 1, xs.size() - 1);
    double x0 = xs[j - 1], x1 = xs[j];
    double v0 = values_(row, static_cast<Eigen::Index>(j - 1));
    double v1 = values_(row, static_cast<Eigen::Index>(j));
    if (x == x0) return v0;
    if (x == x1) return v1;
    return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
}

double GridFunction::eval(std::size_t comp, double x) const {
    if (comp >= dim()) throw std::out_of_range("GridFunction::eval: component out of range");
    if (eval_) return eval_(comp, x);
    return reconstruct(comp, x);
}

double GridFunction::derivative(std::size_t comp, double x, int order) const {
    if (order < 1) return eval(comp, x);
    auto k = static_cast<std::size_t>(order - 1);
    if (k < derivs_.size() && derivs_[k]) return derivs_[k](comp, x);
    if (k < deriv_values_.size()) {
        GridFunction d(grid_, deriv_values_[k], p_);
        return d.reconstruct(comp, x);
    }
    throw std::invalid_argument("GridFunction: no derivative data of order " + std::to_string(order));
}

Eigen::MatrixXd GridFunction::derivative_values(int order) const {
    if (order < 1) return values_;
    auto k = static_cast<std::size_t>(order - 1);
    if (k < deriv_values_.size()) return deriv_values_[k];
    if (k < derivs_.size() && derivs_[k]) {
        Eigen::MatrixXd d(values_.rows(), values_.cols());
        for (Eigen::Index j = 0; j < d.rows(); ++j)
            for (Eigen::Index i = 0; i < d.cols(); ++i)
                d(j, i) = derivs_[k](static_cast<std::size_t>(j), grid_->quad_points[static_cast<std::size_t>(i)]);
        return d;
    }
    throw std::invalid_argument("GridFunction: no derivative data of order " + std::to_string(order));
}

GridFunction GridFunction::with_evaluator(Evaluator f, std::vector<Evaluator> derivatives) const {
    GridFunction u = *this;
    for (std::size_t j = 0; j < dim(); ++j)
        for (std::size_t i = 0; i < size(); ++i) {
            double v = values_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
            double e = f(j, grid_->quad_points[i]);
            if (std::abs(v - e) > 1e-12 * (1.0 + std::abs(v)))
                throw std::invalid_argument("GridFunction: evaluator disagrees with stored values");
        }
    u.eval_ = std::move(f);
    u.derivs_ = std::move(derivatives);
    return u;
}

GridFunction GridFunction::with_derivative_values(std::vector<Eigen::MatrixXd> derivs) const {
    for (auto& d : derivs)
        if (d.rows() != values_.rows() || d.cols() != values_.cols())
            throw std::invalid_argument("GridFunction: derivative values have the wrong shape");
    GridFunction u = *this;
    u.deriv_values_ = std::move(derivs);
    return u;
}

GridFunction GridFunction::with_p(double p) const {
    if (!(p >= 1.0)) throw std::invalid_argument("GridFunction: exponent p must be >= 1");
    GridFunction u = *this;
    u.p_ = p;
    return u;
}

GridFunction GridFunction::without_evaluator() const {
    GridFunction u(grid_, values_, p_);
    return u;
}

void GridFunction::check_compatible(const GridFunction& o) const {
    if (grid_ != o.grid_ && (grid_->size() != o.grid_->size() || grid_->a != o.grid_->a || grid_->b != o.grid_->b))
        throw std::invalid_argument("GridFunction: incompatible grids");
    if (dim() != o.dim()) throw std::invalid_argument("GridFunction: dimension mismatch");
}

namespace {

GridFunction combine(const GridFunction& u, const GridFunction& v, double su, double sv,
                     const Evaluator& eu, const Evaluator& ev, const std::vector<Evaluator>& du,
                     const std::vector<Evaluator>& dv) {
    GridFunction r(u.grid_ptr(), su * u.values() + sv * v.values(), u.p());
    if (eu && ev) {
        Evaluator e = [eu, ev, su, sv](std::size_t j, double x) { return su * eu(j, x) + sv * ev(j, x); };
        std::vector<Evaluator> ds;
        for (std::size_t k = 0; k < std::min(du.size(), dv.size()); ++k) {
            auto a = du[k], b = dv[k];
            ds.push_back([a, b, su, sv](std::size_t j, double x) { return su * a(j, x) + sv * b(j, x); });
        }
        return r.with_evaluator(std::move(e), std::move(ds));
    }
    return r;
}

}  // namespace

GridFunction GridFunction::operator+(const GridFunction& o) const {
    check_compatible(o);
    return combine(*this, o, 1.0, 1.0, eval_, o.eval_, derivs_, o.derivs_);
}

GridFunction GridFunction::operator-(const GridFunction& o) const {
    check_compatible(o);
    return combine(*this, o, 1.0, -1.0, eval_, o.eval_, derivs_, o.derivs_);
}

GridFunction GridFunction::operator*(double s) const {
    GridFunction r(grid_, s * values_, p_);
    if (eval_) {
        auto e = eval_;
        std::vector<Evaluator> ds;
        for (auto& d : derivs_) ds.push_back([d, s](std::size_t j, double x) { return s * d(j, x); });
        r.eval_ = [e, s](std::size_t j, double x) { return s * e(j, x); };
        r.derivs_ = std::move(ds);
    }
    for (auto& d : deriv_values_) r.deriv_values_.push_back(s * d);
    return r;
}

// ---------------------------------------------------------------------------
// Norms

double lp_norm(const Habitat1D& grid, const Eigen::MatrixXd& values, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: exponent p must be >= 1");
    if (static_cast<std::size_t>(values.cols()) != grid.size())
        throw std::invalid_argument("lp_norm: values do not match quadrature points");
    double scale = values.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    if (std::isinf(p)) return scale;
    double s = 0.0;
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
        double wi = grid.quad_weights[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < values.rows(); ++j) s += wi * std::pow(std::abs(values(j, i)) / scale, p);
    }
    return scale * std::pow(s, 1.0 / p);
}

double lp_norm(const GridFunction& u, double p) { return lp_norm(u.grid(), u.values(), p); }

double lp_norm(const GridFunction& u) { return lp_norm(u, u.p()); }

std::vector<double> sample_abscissae(const Habitat1D& grid) {
    std::vector<double> xs = grid.nodes;
    xs.insert(xs.end(), grid.quad_points.begin(), grid.quad_points.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

namespace {

double hoelder_norm(const GridFunction& u, double alpha) {
    auto xs = sample_abscissae(u.grid());
    const std::size_t d = u.dim();
    Eigen::MatrixXd v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = u.eval(j, xs[i]);
    double sup = v.colwise().norm().maxCoeff();
    double semi = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t k = i + 1; k < xs.size(); ++k) {
            double diff = (v.col(static_cast<Eigen::Index>(i)) - v.col(static_cast<Eigen::Index>(k))).norm();
            semi = std::max(semi, diff / std::pow(xs[k] - xs[i], alpha));
        }
    return sup + semi;
}

}  // namespace

double space_norm(const GridFunction& u, const SmoothingSpace& space) {
    switch (space.kind) {
        case SmoothingSpace::Kind::Lp:
            return lp_norm(u);
        case SmoothingSpace::Kind::Sobolev: {
            if (u.derivative_orders() < space.order)
                throw std::invalid_argument("space_norm: Sobolev norm needs derivative data");
            const double p = u.p();
            double s = std::pow(lp_norm(u), p);
            for (int k = 1; k <= space.order; ++k) s += std::pow(lp_norm(u.grid(), u.derivative_values(k), p), p);
            return std::pow(s, 1.0 / p);
        }
        case SmoothingSpace::Kind::Hoelder:
            return hoelder_norm(u, space.alpha);
    }
    return 0.0;
}

}  // namespace ide

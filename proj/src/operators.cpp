#include "ide/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ide {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

void check_phase_params(const TimeModel& time, const std::vector<double>& params) {
    if (params.empty()) throw std::invalid_argument("time dependence: no phase parameters");
    if (time.kind == TimeModel::Kind::Autonomous && params.size() != 1)
        throw std::invalid_argument("time dependence: autonomous data takes exactly one parameter");
    if (time.kind == TimeModel::Kind::Periodic && params.size() != static_cast<std::size_t>(time.period))
        throw std::invalid_argument("time dependence: periodic data needs one parameter per phase");
    for (double v : params)
        if (!std::isfinite(v)) throw std::invalid_argument("time dependence: non-finite phase parameter");
}

}  // namespace

// ---------------------------------------------------------------------------
// Exponents and time

ExponentConfig ExponentConfig::make(double p, double q, int m) {
    if (!(p > 1.0) || !(q > 1.0)) throw std::invalid_argument("ExponentConfig: p and q must exceed 1");
    if (!(q < p)) throw std::invalid_argument("ExponentConfig: need q < p");
    if (m < 0) throw std::invalid_argument("ExponentConfig: m must be nonnegative");
    if (!(m * q < p)) throw std::invalid_argument("ExponentConfig: need m*q < p");
    return {p, q, q / (q - 1.0), m};
}

TimeModel TimeModel::periodic(int theta) {
    if (theta < 1) throw std::invalid_argument("TimeModel: period must be positive");
    return {Kind::Periodic, theta, 0};
}

TimeModel TimeModel::window(int t_min) { return {Kind::Window, 1, t_min}; }

std::size_t TimeModel::phase(int t, std::size_t phases) const {
    if (phases <= 1) return 0;
    switch (kind) {
        case Kind::Autonomous:
            return 0;
        case Kind::Periodic: {
            long long r = ((static_cast<long long>(t) % period) + period) % period;
            return static_cast<std::size_t>(r) % phases;
        }
        case Kind::Window: {
            long long r = static_cast<long long>(t) - t_min;
            r = std::clamp<long long>(r, 0, static_cast<long long>(phases) - 1);
            return static_cast<std::size_t>(r);
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Kernels

KernelSpec KernelSpec::laplace(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("Laplace kernel: δ must be positive");
    KernelSpec k;
    k.kind_ = Kind::Laplace;
    k.params_ = {delta};
    return k;
}

KernelSpec KernelSpec::root_exp(double delta, double alpha) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("root kernel: δ must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("root kernel: exponent must lie in (0,1]");
    KernelSpec k;
    k.kind_ = Kind::RootExp;
    k.params_ = {delta};
    k.alpha_ = alpha;
    return k;
}

KernelSpec KernelSpec::gaussian(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("Gaussian kernel: σ must be positive");
    KernelSpec k;
    k.kind_ = Kind::Gaussian;
    k.params_ = {sigma};
    return k;
}

KernelSpec KernelSpec::separable(std::vector<Term> terms) {
    if (terms.empty()) throw std::invalid_argument("separable kernel: no terms");
    for (auto& term : terms)
        if (!term.a || !term.b) throw std::invalid_argument("separable kernel: missing factor");
    KernelSpec k;
    k.kind_ = Kind::Separable;
    k.params_ = {1.0};
    k.terms_ = std::move(terms);
    return k;
}

KernelSpec KernelSpec::constant(double c) {
    auto one = [](double) { return 1.0; };
    return separable({Term{c, one, one, [](double) { return 0.0; }}});
}

KernelSpec KernelSpec::tabulated(HabitatPtr grid, std::vector<Eigen::MatrixXd> tables, TimeModel time) {
    if (!grid) throw std::invalid_argument("tabulated kernel: null grid");
    if (tables.empty()) throw std::invalid_argument("tabulated kernel: no tables");
    const auto n = static_cast<Eigen::Index>(grid->size());
    for (auto& t : tables) {
        if (t.rows() != n || t.cols() != n) throw std::invalid_argument("tabulated kernel: table shape mismatch");
        if (!t.allFinite()) throw std::invalid_argument("tabulated kernel: non-finite entry");
    }
    if (time.kind == TimeModel::Kind::Autonomous && tables.size() != 1)
        throw std::invalid_argument("tabulated kernel: autonomous kernel takes one table");
    if (time.kind == TimeModel::Kind::Periodic && tables.size() != static_cast<std::size_t>(time.period))
        throw std::invalid_argument("tabulated kernel: periodic kernel needs one table per phase");
    KernelSpec k;
    k.kind_ = Kind::Tabulated;
    k.time_ = time;
    k.table_grid_ = std::move(grid);
    k.tables_ = std::move(tables);
    return k;
}

KernelSpec KernelSpec::with_phases(TimeModel time, std::vector<double> params) const {
    if (kind_ == Kind::Tabulated) throw std::invalid_argument("tabulated kernel: time dependence comes from the tables");
    check_phase_params(time, params);
    if (kind_ != Kind::Separable)
        for (double v : params)
            if (!(v > 0.0)) throw std::invalid_argument("kernel: phase parameters must be positive");
    KernelSpec k = *this;
    k.time_ = time;
    k.params_ = std::move(params);
    return k;
}

std::size_t KernelSpec::phases() const { return kind_ == Kind::Tabulated ? tables_.size() : params_.size(); }

double KernelSpec::parameter(int t) const {
    if (kind_ == Kind::Tabulated) return 1.0;
    return params_[time_.phase(t, params_.size())];
}

namespace {

// Linear interpolation position of x among sorted abscissae.
std::pair<std::size_t, double> locate(const std::vector<double>& xs, double x) {
    if (xs.size() == 1) return {0, 0.0};
    if (x <= xs.front()) return {0, 0.0};
    if (x >= xs.back()) return {xs.size() - 2, 1.0};
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
    return {j, (x - xs[j]) / (xs[j + 1] - xs[j])};
}

bool same_grid(const Habitat1D& a, const Habitat1D& b) {
    return a.size() == b.size() && a.a == b.a && a.b == b.b && a.order == b.order;
}

}  // namespace

double KernelSpec::operator()(int t, double x, double y) const {
    const double s = parameter(t);
    const double r = std::abs(x - y);
    switch (kind_) {
        case Kind::Laplace:
            return 0.5 * s * std::exp(-s * r);
        case Kind::RootExp:
            return 0.5 * s * s * std::exp(-s * std::pow(r, alpha_));
        case Kind::Gaussian:
            return std::exp(-r * r / (2.0 * s * s)) / (s * std::sqrt(2.0 * kPi));
        case Kind::Separable: {
            double v = 0.0;
            for (auto& term : terms_) v += term.weight * term.a(x) * term.b(y);
            return s * v;
        }
        case Kind::Tabulated: {
            const auto& tab = tables_[time_.phase(t, tables_.size())];
            const auto& xs = table_grid_->quad_points;
            if (xs.size() == 1) return tab(0, 0);
            auto [i, fx] = locate(xs, x);
            auto [j, fy] = locate(xs, y);
            auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
            return (1 - fx) * (1 - fy) * tab(I, J) + fx * (1 - fy) * tab(I + 1, J) + (1 - fx) * fy * tab(I, J + 1) +
                   fx * fy * tab(I + 1, J + 1);
        }
    }
    return 0.0;
}

bool KernelSpec::has_dx() const {
    switch (kind_) {
        case Kind::Laplace:
        case Kind::Gaussian:
            return true;
        case Kind::RootExp:
            return alpha_ == 1.0;
        case Kind::Separable:
            return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return static_cast<bool>(t.da); });
        case Kind::Tabulated:
            return table_grid_->size() > 1;
    }
    return false;
}

double KernelSpec::dx(int t, double x, double y) const {
    if (!has_dx()) throw std::invalid_argument("kernel: x-derivative unavailable for this variant");
    const double s = parameter(t);
    const double d = x - y;
    switch (kind_) {
        case Kind::Laplace:
            return -0.5 * s * s * sgn(d) * std::exp(-s * std::abs(d));
        case Kind::RootExp:
            return -0.5 * s * s * s * sgn(d) * std::exp(-s * std::abs(d));
        case Kind::Gaussian:
            return -d / (s * s) * (*this)(t, x, y);
        case Kind::Separable: {
            double v = 0.0;
            for (auto& term : terms_) v += term.weight * term.da(x) * term.b(y);
            return s * v;
        }
        case Kind::Tabulated: {
            const auto& xs = table_grid_->quad_points;
            auto [i, fx] = locate(xs, x);
            (void)fx;
            double h = xs[i + 1] - xs[i];
            return ((*this)(t, xs[i + 1], y) - (*this)(t, xs[i], y)) / h;
        }
    }
    return 0.0;
}

void KernelSpec::row(int t, double x, const Habitat1D& grid, Eigen::Ref<Eigen::VectorXd> out) const {
    const std::size_t n = grid.size();
    if (static_cast<std::size_t>(out.size()) != n) throw std::invalid_argument("kernel row: output size mismatch");
    if (kind_ == Kind::Tabulated && same_grid(grid, *table_grid_)) {
        const auto& tab = tables_[time_.phase(t, tables_.size())];
        if (n == 1) {
            out(0) = tab(0, 0);
            return;
        }
        auto [i, fx] = locate(grid.quad_points, x);
        auto I = static_cast<Eigen::Index>(i);
        out = (1 - fx) * tab.row(I).transpose() + fx * tab.row(I + 1).transpose();
        return;
    }
    if (kind_ == Kind::Separable) {
        const double s = parameter(t);
        out.setZero();
        for (auto& term : terms_) {
            const double ax = s * term.weight * term.a(x);
            if (ax == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(j)) += ax * term.b(grid.quad_points[j]);
        }
        return;
    }
    for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(j)) = (*this)(t, x, grid.quad_points[j]);
}

void KernelSpec::dx_row(int t, double x, const Habitat1D& grid, Eigen::Ref<Eigen::VectorXd> out) const {
    const std::size_t n = grid.size();
    if (static_cast<std::size_t>(out.size()) != n) throw std::invalid_argument("kernel row: output size mismatch");
    for (std::size_t j = 0; j < n; ++j) out(static_cast<Eigen::Index>(j)) = dx(t, x, grid.quad_points[j]);
}

Eigen::MatrixXd KernelSpec::matrix(int t, const Habitat1D& grid) const {
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd K(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        row(t, grid.quad_points[static_cast<std::size_t>(i)], grid, r);
        K.row(i) = r.transpose();
    }
    if (!K.allFinite()) throw std::runtime_error("kernel: non-finite kernel sample");
    return K;
}

std::vector<std::pair<TimeModel, std::size_t>> time_models(const KernelSpec& k) {
    return {{k.time_model(), k.phases()}};
}

// ---------------------------------------------------------------------------
// Cut-off

namespace {

double bump(double s) {
    if (s <= -1.0 || s >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

double bump_d1(double s) {
    if (s <= -1.0 || s >= 1.0) return 0.0;
    double u = 1.0 - s * s;
    return bump(s) * (-2.0 * s / (u * u));
}

double bump_d2(double s) {
    if (s <= -1.0 || s >= 1.0) return 0.0;
    double u = 1.0 - s * s;
    return bump(s) * (4.0 * s * s / (u * u * u * u) - (2.0 + 6.0 * s * s) / (u * u * u));
}

// Cumulative integral of the bump over [-1, s], tabulated on panels.
class BumpIntegral {
public:
    static const BumpIntegral& get() {
        static const BumpIntegral table;
        return table;
    }

    double operator()(double s) const {
        if (s <= -1.0) return 0.0;
        if (s >= 1.0) return cum_.back();
        double pos = (s + 1.0) / width_;
        auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kPanels - 1);
        double left = -1.0 + static_cast<double>(i) * width_;
        return cum_[i] + integrate(left, s);
    }

    double total() const { return cum_.back(); }

private:
    static constexpr std::size_t kPanels = 1024;

    BumpIntegral() {
        gauss_legendre(8, x_, w_);
        width_ = 2.0 / static_cast<double>(kPanels);
        cum_.assign(kPanels + 1, 0.0);
        for (std::size_t i = 0; i < kPanels; ++i) {
            double left = -1.0 + static_cast<double>(i) * width_;
            cum_[i + 1] = cum_[i] + integrate(left, left + width_);
        }
    }

    double integrate(double lo, double hi) const {
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo), sum = 0.0;
        for (std::size_t k = 0; k < x_.size(); ++k) sum += w_[k] * bump(mid + half * x_[k]);
        return sum * half;
    }

    std::vector<double> x_, w_, cum_;
    double width_ = 0.0;
};

}  // namespace

CutoffFunction::CutoffFunction(double rho) : rho_(rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("cut-off: ρ must be positive");
    const int samples = 4096;
    for (int i = 0; i <= samples; ++i) {
        double z = 2.0 * rho_ * i / samples;
        max_slope_ = std::max(max_slope_, std::abs(derivative(z, 1) * z + derivative(z, 0)));
    }
}

double CutoffFunction::derivative(double z, int order) const {
    if (order < 0 || order > 3) throw std::invalid_argument("cut-off: derivative order must be 0..3");
    const double a = std::abs(z);
    if (a >= 2.0 * rho_) return 0.0;
    if (a <= rho_) return order == 0 ? 1.0 : 0.0;
    const auto& B = BumpIntegral::get();
    const double s = 2.0 * (a - rho_) / rho_ - 1.0;
    const double ds = 2.0 / rho_;
    const double sign = sgn(z);
    switch (order) {
        case 0:
            return 1.0 - B(s) / B.total();
        case 1:
            return -bump(s) / B.total() * ds * sign;
        case 2:
            return -bump_d1(s) / B.total() * ds * ds;
        default:
            return -bump_d2(s) / B.total() * ds * ds * ds * sign;
    }
}

// ---------------------------------------------------------------------------
// Growth functions

struct GrowthSpec::Impl {
    Kind kind = Kind::Linear;
    TimeModel time;
    std::vector<double> params{1.0};
    double c = 1.0;
    PointFn c_fn;
    double a = 0.0;
    double b = 0.0;
    std::shared_ptr<const Impl> first;
    std::shared_ptr<const Impl> second;
    std::shared_ptr<const CutoffFunction> chi;
    ReferenceFn phi;
    TimeModel ref_time;
    std::size_t ref_phases = 1;

    double param(int t) const { return params[time.phase(t, params.size())]; }
    double derivative(int t, double x, double z, int order) const;
    int smoothness() const;
};

namespace {

constexpr int kAnalytic = 1 << 20;

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

double GrowthSpec::Impl::derivative(int t, double x, double z, int order) const {
    if (order < 0) throw std::invalid_argument("growth: negative derivative order");
    switch (kind) {
        case Kind::Linear: {
            double cx = (c_fn ? c_fn(x) : c) * param(t);
            return order == 0 ? cx * z : order == 1 ? cx : 0.0;
        }
        case Kind::Quadratic: {
            double f = param(t);
            if (order == 0) return f * (a * z + b * z * z);
            if (order == 1) return f * (a + 2.0 * b * z);
            return order == 2 ? 2.0 * f * b : 0.0;
        }
        case Kind::Ricker: {
            double r = param(t);
            if (order == 0) return z * std::exp(r * (1.0 - z));
            return std::exp(r) * std::pow(-r, order - 1) * std::exp(-r * z) * (order - r * z);
        }
        case Kind::BevertonHolt: {
            double av = param(t);
            if (b == 0.0) return order == 0 ? av * z : order == 1 ? av : 0.0;
            double u = 1.0 + b * z;
            if (order == 0) return av * z / u;
            double sign = (order % 2 == 1) ? 1.0 : -1.0;
            return av / b * sign * factorial(order) * std::pow(b, order) * std::pow(u, -order - 1);
        }
        case Kind::Sum:
            return first->derivative(t, x, z, order) + second->derivative(t, x, z, order);
        case Kind::CutoffModified: {
            if (order > 3) throw std::invalid_argument("cut-off growth: derivatives available up to order 3");
            const double ref = phi ? phi(t, x) : 0.0;
            const double psi0 = chi->derivative(z, 0) * z;
            auto inner = [&](int k) { return first->derivative(t, x, psi0 + ref, k); };
            if (order == 0) return inner(0) - first->derivative(t, x, ref, 0);
            auto psi = [&](int k) { return chi->derivative(z, k) * z + k * chi->derivative(z, k - 1); };
            const double p1 = psi(1);
            if (order == 1) return inner(1) * p1;
            const double p2 = psi(2);
            if (order == 2) return inner(2) * p1 * p1 + inner(1) * p2;
            return inner(3) * p1 * p1 * p1 + 3.0 * inner(2) * p1 * p2 + inner(1) * psi(3);
        }
    }
    return 0.0;
}

int GrowthSpec::Impl::smoothness() const {
    switch (kind) {
        case Kind::Sum:
            return std::min(first->smoothness(), second->smoothness());
        case Kind::CutoffModified:
            return std::min(first->smoothness(), 3);
        default:
            return kAnalytic;
    }
}

GrowthSpec GrowthSpec::linear(double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("linear growth: non-finite coefficient");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Linear;
    impl->c = c;
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::linear(PointFn c) {
    if (!c) throw std::invalid_argument("linear growth: empty coefficient function");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Linear;
    impl->c_fn = std::move(c);
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::quadratic(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("quadratic growth: non-finite coefficient");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Quadratic;
    impl->a = a;
    impl->b = b;
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::ricker(double r) {
    if (!std::isfinite(r)) throw std::invalid_argument("Ricker growth: non-finite rate");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Ricker;
    impl->params = {r};
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::beverton_holt(double a, double b) {
    if (!std::isfinite(a) || !(b >= 0.0) || !std::isfinite(b))
        throw std::invalid_argument("Beverton-Holt growth: need finite a and b >= 0");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::BevertonHolt;
    impl->params = {a};
    impl->b = b;
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::sum(const GrowthSpec& f, const GrowthSpec& h) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Sum;
    impl->first = f.impl_;
    impl->second = h.impl_;
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::cutoff(const GrowthSpec& inner, double rho, ReferenceFn phi, TimeModel reference_time,
                              std::size_t reference_phases) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::CutoffModified;
    impl->first = inner.impl_;
    impl->chi = std::make_shared<const CutoffFunction>(rho);
    impl->phi = std::move(phi);
    impl->ref_time = reference_time;
    impl->ref_phases = std::max<std::size_t>(reference_phases, 1);
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec GrowthSpec::with_phases(TimeModel time, std::vector<double> params) const {
    if (kind() == Kind::Sum || kind() == Kind::CutoffModified)
        throw std::invalid_argument("growth: set time dependence on the parts of a composite growth");
    check_phase_params(time, params);
    auto impl = std::make_shared<Impl>(*impl_);
    impl->time = time;
    impl->params = std::move(params);
    GrowthSpec g;
    g.impl_ = impl;
    return g;
}

GrowthSpec::Kind GrowthSpec::kind() const { return impl_->kind; }
const TimeModel& GrowthSpec::time_model() const { return impl_->time; }
std::size_t GrowthSpec::phases() const { return impl_->params.size(); }

std::vector<std::pair<TimeModel, std::size_t>> GrowthSpec::time_models() const {
    std::vector<std::pair<TimeModel, std::size_t>> out;
    std::vector<const Impl*> stack{impl_.get()};
    while (!stack.empty()) {
        const Impl* n = stack.back();
        stack.pop_back();
        if (n->kind == Kind::CutoffModified) out.emplace_back(n->ref_time, n->ref_phases);
        else if (n->kind != Kind::Sum) out.emplace_back(n->time, n->params.size());
        if (n->first) stack.push_back(n->first.get());
        if (n->second) stack.push_back(n->second.get());
    }
    return out;
}

double GrowthSpec::derivative(int t, double x, double z, int order) const {
    if (order > smoothness()) throw std::invalid_argument("growth: derivative order exceeds available smoothness");
    return impl_->derivative(t, x, z, order);
}

int GrowthSpec::smoothness() const { return impl_->smoothness(); }

double GrowthSpec::cutoff_radius() const {
    double rho = 0.0;
    std::vector<const Impl*> stack{impl_.get()};
    while (!stack.empty()) {
        const Impl* n = stack.back();
        stack.pop_back();
        if (n->chi) rho = std::max(rho, n->chi->rho());
        if (n->first) stack.push_back(n->first.get());
        if (n->second) stack.push_back(n->second.get());
    }
    return rho;
}

GrowthSpec cutoff_modify(const GrowthSpec& g_tilde, const ReferenceFn& phi, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("cutoff_modify: ρ must be positive");
    return GrowthSpec::cutoff(g_tilde, rho, phi);
}

GrowthSpec cutoff_modify(const GrowthSpec& g_tilde, const std::vector<GridFunction>& phi, int t_min, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("cutoff_modify: ρ must be positive");
    if (phi.empty()) throw std::invalid_argument("cutoff_modify: empty reference trajectory");
    for (auto& state : phi)
        if (!state.values().allFinite()) throw std::invalid_argument("cutoff_modify: reference is not bounded");
    auto traj = std::make_shared<const std::vector<GridFunction>>(phi);
    TimeModel window = TimeModel::window(t_min);
    ReferenceFn ref = [traj, window](int t, double x) {
        return (*traj)[window.phase(t, traj->size())].eval(0, x);
    };
    return GrowthSpec::cutoff(g_tilde, rho, ref, window, phi.size());
}

// ---------------------------------------------------------------------------
// Operators

GridFunction fredholm_apply(const KernelSpec& k, int t, const GridFunction& v) {
    const HabitatPtr grid = v.grid_ptr();
    const Eigen::MatrixXd weighted = v.values() * grid->weights().asDiagonal();
    const KernelSpec kernel = k;
    Evaluator f = [kernel, grid, weighted, t](std::size_t comp, double x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(grid->size()));
        kernel.row(t, x, *grid, r);
        return weighted.row(static_cast<Eigen::Index>(comp)).dot(r);
    };
    std::vector<Evaluator> derivs;
    if (k.has_dx())
        derivs.push_back([kernel, grid, weighted, t](std::size_t comp, double x) {
            Eigen::VectorXd r(static_cast<Eigen::Index>(grid->size()));
            kernel.dx_row(t, x, *grid, r);
            return weighted.row(static_cast<Eigen::Index>(comp)).dot(r);
        });
    GridFunction out = GridFunction::sample(grid, v.dim(), f, v.p(), std::move(derivs));
    if (!out.values().allFinite()) throw std::runtime_error("fredholm_apply: non-finite kernel sample");
    return out;
}

double hille_tamarkin_norm(const KernelSpec& k, int t, const ExponentConfig& cfg, const Habitat1D& grid) {
    const Eigen::MatrixXd K = k.matrix(t, grid);
    const auto w = grid.weights();
    double outer = 0.0;
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
        double inner = (K.row(i).cwiseAbs().array().pow(cfg.q_conj) * w.transpose().array()).sum();
        outer += w(i) * std::pow(inner, cfg.p / cfg.q_conj);
    }
    double r = std::pow(outer, 1.0 / cfg.p);
    if (!std::isfinite(r)) throw std::runtime_error("hille_tamarkin_norm: non-integrable kernel sample");
    return r;
}

LaplaceBoundReadings laplace_ht_readings(double delta, double length, const ExponentConfig& cfg) {
    LaplaceBoundReadings r;
    r.literal = std::pow(length, 1.0 + cfg.p - 1.0 / cfg.q) * std::pow(0.5 * delta, cfg.p);
    r.rooted = std::pow(r.literal, 1.0 / cfg.p);
    r.weaker = std::max(r.literal, r.rooted);
    return r;
}

SmoothingResult smoothing_constant(const KernelSpec& k, int t, const ExponentConfig& cfg, const Habitat1D& grid) {
    const double l = grid.length();
    const double s = k.parameter(t);
    const double p = cfg.p;
    switch (k.kind()) {
        case KernelSpec::Kind::Laplace: {
            double C = std::pow(l, 1.0 + 1.0 / p - 1.0 / (p * cfg.q)) * (0.5 * s) *
                       std::pow(1.0 + std::pow(0.5 * s, p), 1.0 / p);
            return {SmoothingSpace::w1p(), C};
        }
        case KernelSpec::Kind::RootExp: {
            double C = 0.5 * s * s * std::pow(l, 1.0 / cfg.q_conj) * std::max(1.0, s);
            return {SmoothingSpace::hoelder(k.alpha()), C};
        }
        case KernelSpec::Kind::Separable: {
            const auto w = grid.weights();
            double C = 0.0;
            for (auto& term : k.terms()) {
                if (!term.da) throw std::invalid_argument("smoothing_constant: separable factor lacks a derivative");
                double ap = 0.0, dap = 0.0, bq = 0.0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    double x = grid.quad_points[i];
                    ap += w(static_cast<Eigen::Index>(i)) * std::pow(std::abs(term.a(x)), p);
                    dap += w(static_cast<Eigen::Index>(i)) * std::pow(std::abs(term.da(x)), p);
                    bq += w(static_cast<Eigen::Index>(i)) * std::pow(std::abs(term.b(x)), cfg.q_conj);
                }
                C += std::abs(term.weight) * std::pow(ap + dap, 1.0 / p) * std::pow(bq, 1.0 / cfg.q_conj);
            }
            C *= std::abs(s);
            if (!std::isfinite(C)) throw std::runtime_error("smoothing_constant: non-finite factor norm");
            return {SmoothingSpace::w1p(), C};
        }
        default:
            throw std::invalid_argument("smoothing_constant: no smoothing constant known for this kernel; supply C_t");
    }
}

GridFunction nemytskii_apply(const GrowthSpec& g, int t, const GridFunction& u) {
    return nemytskii_derivative(g, t, u, 0, {});
}

GridFunction nemytskii_derivative(const GrowthSpec& g, int t, const GridFunction& u, int order,
                                  const std::vector<GridFunction>& directions) {
    if (order < 0) throw std::invalid_argument("nemytskii_derivative: negative order");
    if (order > g.smoothness()) throw std::invalid_argument("nemytskii_derivative: order exceeds available smoothness");
    if (directions.size() != static_cast<std::size_t>(order))
        throw std::invalid_argument("nemytskii_derivative: need one direction per order");
    for (auto& v : directions)
        if (v.dim() != u.dim() || v.size() != u.size())
            throw std::invalid_argument("nemytskii_derivative: direction dimension mismatch");
    const auto& xs = u.grid().quad_points;
    Eigen::MatrixXd out(u.values().rows(), u.values().cols());
    for (Eigen::Index j = 0; j < out.rows(); ++j)
        for (Eigen::Index i = 0; i < out.cols(); ++i) {
            double v = g.derivative(t, xs[static_cast<std::size_t>(i)], u.values()(j, i), order);
            for (auto& d : directions) v *= d.values()(j, i);
            out(j, i) = v;
        }
    if (!out.allFinite()) throw std::runtime_error("nemytskii: non-finite output value");
    GridFunction result(u.grid_ptr(), std::move(out), u.p());
    bool exact = u.has_evaluator() &&
                 std::all_of(directions.begin(), directions.end(), [](const GridFunction& d) { return d.has_evaluator(); });
    if (!exact) return result;
    Evaluator f = [g, t, u, directions, order](std::size_t comp, double x) {
        double v = g.derivative(t, x, u.eval(comp, x), order);
        for (auto& d : directions) v *= d.eval(comp, x);
        return v;
    };
    return result.with_evaluator(std::move(f));
}

double lipschitz_bound(const Eigen::VectorXd& lambda_at_quad, const ExponentConfig& cfg, const Habitat1D& grid) {
    if (!(cfg.q < cfg.p)) throw std::invalid_argument("lipschitz_bound: exponent degenerates for q >= p");
    if (static_cast<std::size_t>(lambda_at_quad.size()) != grid.size())
        throw std::invalid_argument("lipschitz_bound: samples do not match quadrature points");
    if ((lambda_at_quad.array() < 0.0).any()) throw std::invalid_argument("lipschitz_bound: λ must be nonnegative");
    const double r = cfg.p / (cfg.p - cfg.q);
    const double top = lambda_at_quad.maxCoeff();
    if (top == 0.0) return 0.0;
    double s = (grid.weights().array() * (lambda_at_quad.array() / top).pow(r)).sum();
    double v = top * std::pow(s, 1.0 / r);
    if (!std::isfinite(v)) throw std::runtime_error("lipschitz_bound: non-finite integral");
    return v;
}

double lipschitz_bound(const PointFn& lambda, const ExponentConfig& cfg, const Habitat1D& grid) {
    Eigen::VectorXd l(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) l(static_cast<Eigen::Index>(i)) = lambda(grid.quad_points[i]);
    return lipschitz_bound(l, cfg, grid);
}

GridFunction hammerstein_apply(const KernelSpec& k, const GrowthSpec& g, int t, const GridFunction& u) {
    return fredholm_apply(k, t, nemytskii_apply(g, t, u));
}

GridFunction hammerstein_derivative(const KernelSpec& k, const GrowthSpec& g, int t, const GridFunction& u, int order,
                                    const std::vector<GridFunction>& directions) {
    return fredholm_apply(k, t, nemytskii_derivative(g, t, u, order, directions));
}

// ---------------------------------------------------------------------------
// Hypothesis audit

double delta_max_a2(double alpha, double beta, int m) {
    if (m < 1) throw std::invalid_argument("delta_max_a2: order must be positive");
    return alpha * (std::pow((alpha + beta) / (alpha + std::pow(alpha, m)), 1.0 / m) - 1.0);
}

double delta_max_b2(double alpha, double beta, int m) {
    if (m < 1) throw std::invalid_argument("delta_max_b2: order must be positive");
    return beta * (1.0 - std::pow((alpha + beta) / (beta + std::pow(beta, m)), 1.0 / m));
}

double center_smallness_bound(const std::vector<double>& K, const std::vector<double>& gap_half_widths) {
    if (K.empty() || gap_half_widths.empty()) throw std::invalid_argument("center_smallness_bound: empty input");
    double kmax = 0.0;
    for (double k : K) kmax = std::max(kmax, k * k + 2.0 * k);
    double dmax = *std::min_element(gap_half_widths.begin(), gap_half_widths.end());
    return dmax / (2.0 * kmax);
}

std::vector<int> audit_times(const std::vector<std::pair<TimeModel, std::size_t>>& models) {
    long long period = 1;
    bool window = false;
    long long lo = 0, hi = 0;
    for (auto& [tm, phases] : models) {
        if (phases <= 1) continue;
        if (tm.kind == TimeModel::Kind::Periodic) period = std::lcm(period, static_cast<long long>(tm.period));
        if (tm.kind == TimeModel::Kind::Window) {
            long long a = tm.t_min, b = tm.t_min + static_cast<long long>(phases) - 1;
            lo = window ? std::min(lo, a) : a;
            hi = window ? std::max(hi, b) : b;
            window = true;
        }
    }
    std::vector<int> times;
    if (window) {
        lo = std::min(lo, 0LL);
        hi = std::max(hi, period - 1);
        for (long long t = lo; t <= hi; ++t) times.push_back(static_cast<int>(t));
    } else {
        for (long long t = 0; t < period; ++t) times.push_back(static_cast<int>(t));
    }
    return times;
}

AuditReport hypothesis_audit(const KernelSpec& k, const GrowthSpec& g, const ExponentConfig& cfg, const Habitat1D& grid,
                             const AuditInput& input) {
    if (!(input.alpha < input.beta) || !(input.alpha >= 0.0))
        throw std::invalid_argument("hypothesis_audit: need 0 <= α < β");
    if (!(input.K >= 1.0)) throw std::invalid_argument("hypothesis_audit: dichotomy constant K must be >= 1");
    if (input.z_samples < 2) throw std::invalid_argument("hypothesis_audit: need at least two z samples");

    AuditReport rep;
    auto models = time_models(k);
    for (auto& m : g.time_models()) models.push_back(m);
    rep.times = audit_times(models);

    double R = input.z_radius > 0.0 ? input.z_radius : 2.0 * g.cutoff_radius();
    if (!(R > 0.0)) R = 1.0;
    std::vector<double> zs(static_cast<std::size_t>(input.z_samples));
    for (int i = 0; i < input.z_samples; ++i) zs[static_cast<std::size_t>(i)] = -R + 2.0 * R * i / (input.z_samples - 1);

    if (!input.smoothing_override.empty() && input.smoothing_override.size() != 1 &&
        input.smoothing_override.size() != rep.times.size())
        throw std::invalid_argument("hypothesis_audit: smoothing override needs one value or one per audited time");

    const auto n = static_cast<Eigen::Index>(grid.size());
    bool laplace_ok = true;
    for (std::size_t it = 0; it < rep.times.size(); ++it) {
        const int t = rep.times[it];
        const double ht = hille_tamarkin_norm(k, t, cfg, grid);
        rep.ht_norms.push_back(ht);

        Eigen::VectorXd lam(n), lam_bar(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = grid.quad_points[static_cast<std::size_t>(i)];
            const double d0 = g.derivative(t, x, 0.0, 1);
            double a = 0.0, b = 0.0;
            for (double z : zs) {
                double d = g.derivative(t, x, z, 1);
                a = std::max(a, std::abs(d - d0));
                b = std::max(b, std::abs(d));
            }
            lam(i) = a;
            lam_bar(i) = b;
        }
        rep.budget.L = std::max(rep.budget.L, ht * lipschitz_bound(lam, cfg, grid));

        double C = 0.0;
        if (!input.smoothing_override.empty()) {
            C = input.smoothing_override.size() == 1 ? input.smoothing_override[0] : input.smoothing_override[it];
            if (!(C >= 0.0) || !std::isfinite(C)) throw std::invalid_argument("hypothesis_audit: invalid smoothing constant");
        } else {
            try {
                C = smoothing_constant(k, t, cfg, grid).C;
            } catch (const std::invalid_argument&) {
                rep.smoothing_known = false;
            }
        }
        rep.budget.C_t.push_back(C);
        if (rep.smoothing_known) rep.budget.L_bar = std::max(rep.budget.L_bar, C * lipschitz_bound(lam_bar, cfg, grid));

        if (k.kind() == KernelSpec::Kind::Laplace) {
            auto readings = laplace_ht_readings(k.parameter(t), grid.length(), cfg);
            if (!rep.laplace_readings) rep.laplace_readings = readings;
            if (ht > readings.weaker * (1.0 + 1e-9)) laplace_ok = false;
        }
    }
    if (!std::isfinite(rep.budget.L) || !std::isfinite(rep.budget.L_bar))
        throw std::runtime_error("hypothesis_audit: non-finite Lipschitz budget");

    rep.delta_gap = 0.5 * (input.beta - input.alpha);
    rep.delta_max = rep.delta_gap;
    if (input.m_plus >= 1 && std::pow(input.alpha, input.m_plus) < input.beta) {
        rep.delta_a2 = delta_max_a2(input.alpha, input.beta, input.m_plus);
        rep.delta_max = std::min(rep.delta_max, *rep.delta_a2);
    }
    if (input.m_minus >= 1 && input.alpha < std::pow(input.beta, input.m_minus)) {
        rep.delta_b2 = delta_max_b2(input.alpha, input.beta, input.m_minus);
        rep.delta_max = std::min(rep.delta_max, *rep.delta_b2);
    }

    rep.four_KL = 4.0 * input.K * rep.budget.L;
    rep.smallness = rep.four_KL < rep.delta_max;
    if (!rep.smallness)
        rep.failures.push_back("smallness violated: 4KL = " + std::to_string(rep.four_KL) +
                               " >= delta_max = " + std::to_string(rep.delta_max));
    if (input.delta) {
        rep.delta_ok = *input.delta > rep.four_KL && *input.delta <= rep.delta_max;
        if (!rep.delta_ok)
            rep.failures.push_back("gap parameter delta = " + std::to_string(*input.delta) + " outside (4KL, delta_max]");
    }
    if (!rep.smoothing_known) rep.failures.push_back("smoothing constant unavailable for this kernel; supply C_t");
    if (!laplace_ok) rep.failures.push_back("Hille-Tamarkin norm exceeds the Laplace bound");
    rep.passed = rep.smallness && rep.delta_ok && rep.smoothing_known && laplace_ok;
    return rep;
}

}  // namespace ide
